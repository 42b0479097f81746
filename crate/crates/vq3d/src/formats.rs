//! JSON, depth-grid, PGM and CSV files exchanged between verbs.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use regex::Regex;
use serde::{Deserialize, Serialize};
use vq3d_core::colmap::ReconstructionModel;
use vq3d_core::frames::GrayImage;
use vq3d_core::geometry::{rotation_from_wxyz, rotation_to_wxyz};
use vq3d_core::localization::{DepthGrid, DepthSource, QueryResult, VisualQuery};
use vq3d_core::registration::{PoseSet, PoseSource};
use vq3d_core::{Direction, FrameId, Intrinsics, PixelPoint, RigidPose, Vec3};

use crate::error::{json_error, read_file, read_string, Error, Location, Result};

/// Pretty JSON with a trailing newline. Map keys come out sorted because
/// every map in these formats is a `BTreeMap`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_string(path)?;
    serde_json::from_str(&text).map_err(|e| json_error(&path.display().to_string(), e))
}

// ---------------------------------------------------------------- names

/// Extracts frame indices from image names with a regex whose first capture
/// group is the decimal index. The last match in the name wins.
#[derive(Debug, Clone)]
pub struct FramePattern(Regex);

pub const DEFAULT_FRAME_PATTERN: &str = r"frame_(\d+)";

impl FramePattern {
    pub fn new(pattern: &str) -> Result<Self> {
        let re = Regex::new(pattern).map_err(|e| Error::Config(format!("frame pattern: {e}")))?;
        if re.captures_len() < 2 {
            return Err(Error::Config(format!("frame pattern `{pattern}` has no capture group")));
        }
        Ok(Self(re))
    }

    pub fn frame_of(&self, name: &str) -> Option<FrameId> {
        self.0.captures_iter(name).last()?.get(1)?.as_str().parse().ok()
    }
}

impl Default for FramePattern {
    fn default() -> Self {
        Self::new(DEFAULT_FRAME_PATTERN).expect("valid default")
    }
}

/// Reads a model directory into a pose set labelled with the directory name.
pub fn model_pose_set(dir: &Path, model: &ReconstructionModel, pattern: &FramePattern) -> Result<PoseSet> {
    let label = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| dir.display().to_string());
    Ok(model.extract_pose_set(&label, |n| pattern.frame_of(n))?)
}

// ---------------------------------------------------------------- poses

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub direction: Direction,
    /// Mean reprojection error of the pose, pixels, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reproj_error: Option<f64>,
}

impl PoseRecord {
    pub fn from_pose(pose: &RigidPose, reproj_error: Option<f64>) -> Self {
        let [qw, qx, qy, qz] = rotation_to_wxyz(&pose.rotation);
        let t = pose.translation;
        Self { qw, qx, qy, qz, tx: t.x, ty: t.y, tz: t.z, direction: pose.direction, reproj_error }
    }

    pub fn pose(&self) -> Result<RigidPose> {
        let r = rotation_from_wxyz(self.qw, self.qx, self.qy, self.qz).map_err(|e| Error::Data(e.to_string()))?;
        let p = RigidPose::new(r, Vec3::new(self.tx, self.ty, self.tz), self.direction);
        if !p.is_finite() {
            return Err(Error::Data("non-finite pose".into()));
        }
        Ok(p)
    }
}

/// `clip_id -> frame_id -> pose`.
pub type PoseFile = BTreeMap<String, BTreeMap<FrameId, PoseRecord>>;

/// Pose set and known reprojection errors of one clip.
pub fn clip_poses(file: &PoseFile, clip: &str, label: &str, source: PoseSource) -> Result<(PoseSet, BTreeMap<FrameId, f64>)> {
    let frames = file.get(clip).ok_or_else(|| Error::Data(format!("pose file has no clip `{clip}`")))?;
    let mut set = PoseSet::empty(label, source, Direction::CameraToWorld);
    let mut errors = BTreeMap::new();
    for (&frame, rec) in frames {
        set.insert(frame, rec.pose().map_err(|e| Error::Data(format!("clip {clip} frame {frame}: {e}")))?);
        if let Some(e) = rec.reproj_error {
            errors.insert(frame, e);
        }
    }
    Ok((set, errors))
}

pub fn pose_records(set: &PoseSet, errors: Option<&BTreeMap<FrameId, f64>>) -> BTreeMap<FrameId, PoseRecord> {
    set.iter().map(|(f, p)| (f, PoseRecord::from_pose(p, errors.and_then(|e| e.get(&f).copied())))).collect()
}

// ---------------------------------------------------------------- depth

/// Depth grid file magic.
pub const DEPTH_MAGIC: &[u8; 4] = b"VQDG";

/// `VQDG`, `u32` width, `u32` height, `u64` frame id, then `width * height`
/// `f32` values, row-major, all little-endian.
pub fn encode_depth(grid: &DepthGrid) -> Vec<u8> {
    let mut b = Vec::with_capacity(20 + 4 * grid.values.len());
    b.extend_from_slice(DEPTH_MAGIC);
    b.write_u32::<LE>(grid.width).expect("vec write");
    b.write_u32::<LE>(grid.height).expect("vec write");
    b.write_u64::<LE>(grid.frame_id).expect("vec write");
    for &v in &grid.values {
        b.write_f32::<LE>(v).expect("vec write");
    }
    b
}

pub fn decode_depth(file: &str, bytes: &[u8]) -> Result<DepthGrid> {
    let bad = |at: u64, why: &str| Error::parse(file, Location::Byte(at), why);
    if bytes.len() < 20 || &bytes[..4] != DEPTH_MAGIC {
        return Err(bad(0, "not a depth grid (bad magic or short header)"));
    }
    let mut c = Cursor::new(&bytes[4..]);
    let width = c.read_u32::<LE>().expect("header length checked");
    let height = c.read_u32::<LE>().expect("header length checked");
    let frame_id = c.read_u64::<LE>().expect("header length checked");
    let n = u64::from(width) * u64::from(height);
    if (bytes.len() as u64 - 20) != n * 4 {
        return Err(bad(20, &format!("expected {} bytes of values for {width}x{height}, found {}", n * 4, bytes.len() - 20)));
    }
    let values = bytes[20..].chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok(DepthGrid { frame_id, width, height, values })
}

pub fn depth_path(depth_dir: &Path, clip: &str, frame: FrameId) -> PathBuf {
    depth_dir.join(clip).join(format!("frame_{frame:06}.depth"))
}

/// Depth grids of one clip, loaded on first use.
pub struct DepthDir {
    dir: PathBuf,
    clip: String,
    cache: std::sync::Mutex<BTreeMap<FrameId, Option<DepthGrid>>>,
}

impl DepthDir {
    pub fn new(depth_dir: &Path, clip: &str) -> Self {
        Self { dir: depth_dir.to_path_buf(), clip: clip.to_string(), cache: Default::default() }
    }

    /// A missing file means no depth for that frame; a malformed one is an error.
    pub fn load(&self, frame: FrameId) -> Result<Option<DepthGrid>> {
        if let Some(g) = self.cache.lock().expect("not poisoned").get(&frame) {
            return Ok(g.clone());
        }
        let path = depth_path(&self.dir, &self.clip, frame);
        let grid = if path.is_file() {
            let g = decode_depth(&path.display().to_string(), &read_file(&path)?)?;
            if g.frame_id != frame {
                return Err(Error::Data(format!("{}: header says frame {}", path.display(), g.frame_id)));
            }
            Some(g)
        } else {
            None
        };
        self.cache.lock().expect("not poisoned").insert(frame, grid.clone());
        Ok(grid)
    }
}

impl DepthSource for DepthDir {
    fn depth(&self, frame: FrameId, p: PixelPoint) -> Option<f64> {
        self.load(frame).ok().flatten()?.sample(p)
    }
}

// ---------------------------------------------------------------- images

/// Decodes ASCII (`P2`) and binary (`P5`) graymaps into `[0, 1]`.
pub fn decode_pgm(file: &str, bytes: &[u8]) -> Result<GrayImage> {
    let bad = |at: usize, why: String| Error::parse(file, Location::Byte(at as u64), why);
    let mut pos = 0;
    // Header tokens are separated by whitespace; `#` starts a comment.
    let token = |pos: &mut usize| -> Option<(usize, String)> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        (start < *pos).then(|| (start, String::from_utf8_lossy(&bytes[start..*pos]).into_owned()))
    };
    let (_, magic) = token(&mut pos).ok_or_else(|| bad(0, "empty file".into()))?;
    let binary = match magic.as_str() {
        "P2" => false,
        "P5" => true,
        m => return Err(bad(0, format!("unsupported magic `{m}`"))),
    };
    let num = |pos: &mut usize, what: &str| -> Result<usize> {
        let (at, t) = token(pos).ok_or_else(|| bad(*pos, format!("missing {what}")))?;
        t.parse().map_err(|_| bad(at, format!("invalid {what} `{t}`")))
    };
    let width = num(&mut pos, "width")?;
    let height = num(&mut pos, "height")?;
    let maxval = num(&mut pos, "maxval")?;
    if !(1..=65535).contains(&maxval) || width == 0 || height == 0 {
        return Err(bad(pos, format!("bad header {width}x{height} maxval {maxval}")));
    }
    let n = width.checked_mul(height).ok_or_else(|| bad(pos, "image too large".into()))?;
    let scale = maxval as f64;
    let mut px = Vec::with_capacity(n.min(bytes.len()));
    if binary {
        pos += 1; // single whitespace byte after maxval
        let wide = maxval > 255;
        let need = n.checked_mul(if wide { 2 } else { 1 }).ok_or_else(|| bad(pos, "image too large".into()))?;
        if bytes.len() < pos || bytes.len() - pos != need {
            return Err(bad(pos, format!("expected {need} bytes of pixels")));
        }
        let data = &bytes[pos..];
        for i in 0..n {
            let v = if wide { usize::from(u16::from_be_bytes([data[2 * i], data[2 * i + 1]])) } else { usize::from(data[i]) };
            if v > maxval {
                return Err(bad(pos + i, format!("pixel {v} above maxval")));
            }
            px.push(v as f64 / scale);
        }
    } else {
        for _ in 0..n {
            let v = num(&mut pos, "pixel")?;
            if v > maxval {
                return Err(bad(pos, format!("pixel {v} above maxval")));
            }
            px.push(v as f64 / scale);
        }
    }
    GrayImage::new(width, height, px).map_err(|e| bad(0, e.to_string()))
}

/// 8-bit binary graymap.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut b = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    b.extend(img.pixels().iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    b
}

/// `frame_id,score` with a header row.
pub fn blur_scores_csv(scores: &[(FrameId, f64)]) -> String {
    let mut s = String::from("frame_id,score\n");
    for (f, v) in scores {
        s.push_str(&format!("{f},{v}\n"));
    }
    s
}

pub fn parse_blur_scores_csv(file: &str, text: &str) -> Result<Vec<(FrameId, f64)>> {
    let mut out = Vec::new();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    for (i, rec) in rdr.deserialize::<(FrameId, f64)>().enumerate() {
        out.push(rec.map_err(|e| Error::parse(file, Location::Line(i + 2), e.to_string()))?);
    }
    Ok(out)
}

// ---------------------------------------------------------------- queries

pub fn read_queries(path: &Path) -> Result<Vec<VisualQuery>> {
    let queries: Vec<VisualQuery> = read_json(path)?;
    let mut seen = std::collections::BTreeSet::new();
    for q in &queries {
        if !seen.insert(q.query_id.as_str()) {
            return Err(Error::Data(format!("{}: duplicate query id {}", path.display(), q.query_id)));
        }
    }
    Ok(queries)
}

pub fn read_results(path: &Path) -> Result<Vec<QueryResult>> {
    read_json(path)
}

/// Intrinsics from a JSON file, or from the single camera of a model directory.
pub fn read_intrinsics(path: &Path) -> Result<Intrinsics> {
    if path.is_dir() {
        let model = crate::model_io::read_model(path)?;
        let mut cams = model.cameras.values();
        return match (cams.next(), cams.next()) {
            (Some(c), None) => Ok(c.intrinsics()?),
            _ => Err(Error::Data(format!("{}: expected exactly one camera, found {}", path.display(), model.cameras.len()))),
        };
    }
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_pattern_default_and_custom() {
        let p = FramePattern::default();
        assert_eq!(p.frame_of("frame_000042.jpg"), Some(42));
        assert_eq!(p.frame_of("a/frame_1/frame_7.png"), Some(7));
        assert_eq!(p.frame_of("img42.jpg"), None);
        let c = FramePattern::new(r"img(\d+)\.").unwrap();
        assert_eq!(c.frame_of("img42.jpg"), Some(42));
        assert!(FramePattern::new(r"img\d+").is_err());
        assert!(FramePattern::new(r"(").is_err());
    }

    #[test]
    fn depth_round_trip_and_layout() {
        let mut g = DepthGrid::empty(9, 3, 2);
        g.values[4] = 2.5;
        let b = encode_depth(&g);
        assert_eq!(&b[..4], b"VQDG");
        assert_eq!(&b[4..8], &3u32.to_le_bytes());
        assert_eq!(&b[12..20], &9u64.to_le_bytes());
        assert_eq!(&b[20 + 16..24 + 16], &2.5f32.to_le_bytes());
        assert_eq!(decode_depth("x", &b).unwrap(), g);
        assert!(decode_depth("x", &b[..b.len() - 1]).is_err());
        assert!(decode_depth("x", b"VQDX").is_err());
    }

    #[test]
    fn pgm_ascii_and_binary() {
        let a = decode_pgm("a", b"P2\n# comment\n3 1\n4\n0 2 4\n").unwrap();
        assert_eq!(a.pixels(), &[0.0, 0.5, 1.0]);
        let b = decode_pgm("b", b"P5 2 1 255\n\x00\xff").unwrap();
        assert_eq!(b.pixels(), &[0.0, 1.0]);
        let w = decode_pgm("w", b"P5 1 1 65535\n\xff\xff").unwrap();
        assert_eq!(w.pixels(), &[1.0]);
        assert!(decode_pgm("c", b"P2 2 1 4\n0 5").is_err());
        assert!(decode_pgm("d", b"P6 1 1 255\n\0\0\0").is_err());
        assert!(decode_pgm("e", b"P5 4 4 255\n\0").is_err());
        let img = GrayImage::new(2, 2, vec![0.0, 1.0, 0.2, 0.6]).unwrap();
        let re = decode_pgm("f", &encode_pgm(&img)).unwrap();
        assert!(re.pixels().iter().zip(img.pixels()).all(|(a, b)| (a - b).abs() <= 0.5 / 255.0));
    }

    #[test]
    fn pose_file_keys_sort_numerically() {
        let mut set = PoseSet::empty("w", PoseSource::WorldAnchor, Direction::CameraToWorld);
        for f in [10, 2, 1] {
            set.insert(f, RigidPose::identity(Direction::CameraToWorld));
        }
        let mut file = PoseFile::new();
        file.insert("clip".into(), pose_records(&set, None));
        let json = to_json(&file);
        assert!(json.find("\"2\"").unwrap() < json.find("\"10\"").unwrap());
        let back: PoseFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, file);
        let (s, e) = clip_poses(&back, "clip", "w", PoseSource::WorldAnchor).unwrap();
        assert_eq!(s.len(), 3);
        assert!(e.is_empty());
        assert!(clip_poses(&back, "other", "w", PoseSource::WorldAnchor).is_err());
    }

    #[test]
    fn pose_record_rejects_unknown_fields() {
        let r: std::result::Result<PoseRecord, _> = serde_json::from_str(
            r#"{"qw":1,"qx":0,"qy":0,"qz":0,"tx":0,"ty":0,"tz":0,"direction":"camera_to_world","extra":1}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn blur_csv_round_trip() {
        let s = vec![(0, 0.5), (3, 1e-7), (4, 0.0)];
        assert_eq!(parse_blur_scores_csv("b", &blur_scores_csv(&s)).unwrap(), s);
    }
}
