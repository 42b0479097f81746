//! Reconstruction model files, text and binary.
//!
//! Text files follow the reconstruction tool's layout: `#` comment headers,
//! one line per camera and per 3D point, two lines per image (pose line, then
//! a possibly empty points2D line). Floats are written in the shortest form
//! that parses back to the same `f64`.
//!
//! Binary files are little-endian. Every file starts with a `u64` record
//! count.
//!
//! | file          | record                                                                 |
//! |---------------|------------------------------------------------------------------------|
//! | cameras.bin   | `u32` id, `i32` model id, `u64` width, `u64` height, `f64` params      |
//! | images.bin    | `u32` id, 4 `f64` qvec (w,x,y,z), 3 `f64` tvec, `u32` camera id, NUL-terminated name, `u64` n, n x (`f64` x, `f64` y, `u64` point id) |
//! | points3D.bin  | `u64` id, 3 `f64` xyz, 3 `u8` rgb, `f64` error, `u64` n, n x (`u32` image id, `u32` point2D index) |
//!
//! A point2D without a 3D point stores `-1` in text and `u64::MAX` in binary.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use vq3d_core::colmap::{CameraModel, ModelCamera, ModelImage, ModelPoint3D, Point2D, ReconstructionModel, TrackElement};

use crate::error::{read_file, write_file, Error, Location, Result};

pub const CAMERAS_TXT: &str = "cameras.txt";
pub const IMAGES_TXT: &str = "images.txt";
pub const POINTS_TXT: &str = "points3D.txt";
pub const CAMERAS_BIN: &str = "cameras.bin";
pub const IMAGES_BIN: &str = "images.bin";
pub const POINTS_BIN: &str = "points3D.bin";

const NO_POINT: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFormat {
    Text,
    Binary,
}

/// The three serialized files of a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelFiles {
    pub cameras: Vec<u8>,
    pub images: Vec<u8>,
    pub points3d: Vec<u8>,
}

impl ModelFiles {
    fn names(format: ModelFormat) -> [&'static str; 3] {
        match format {
            ModelFormat::Text => [CAMERAS_TXT, IMAGES_TXT, POINTS_TXT],
            ModelFormat::Binary => [CAMERAS_BIN, IMAGES_BIN, POINTS_BIN],
        }
    }

    pub fn read_dir(dir: &Path, format: ModelFormat) -> Result<Self> {
        let [c, i, p] = Self::names(format);
        Ok(Self { cameras: read_file(&dir.join(c))?, images: read_file(&dir.join(i))?, points3d: read_file(&dir.join(p))? })
    }

    pub fn write_dir(&self, dir: &Path, format: ModelFormat) -> Result<()> {
        let [c, i, p] = Self::names(format);
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join(c), &self.cameras)?;
        write_file(&dir.join(i), &self.images)?;
        write_file(&dir.join(p), &self.points3d)
    }
}

/// Parses and integrity-checks a model.
pub fn parse_model(files: &ModelFiles, format: ModelFormat) -> Result<ReconstructionModel> {
    let model = match format {
        ModelFormat::Text => ReconstructionModel {
            cameras: parse_cameras_text(&files.cameras)?,
            images: parse_images_text(&files.images)?,
            points3d: parse_points_text(&files.points3d)?,
        },
        ModelFormat::Binary => ReconstructionModel {
            cameras: parse_cameras_binary(&files.cameras)?,
            images: parse_images_binary(&files.images)?,
            points3d: parse_points_binary(&files.points3d)?,
        },
    };
    model.validate()?;
    Ok(model)
}

pub fn serialize_model(model: &ReconstructionModel, format: ModelFormat) -> Result<ModelFiles> {
    model.validate()?;
    match format {
        ModelFormat::Text => {
            if let Some(img) = model.images.values().find(|i| i.name.chars().any(char::is_whitespace)) {
                return Err(Error::Integrity(format!("image {}: name {:?} contains whitespace", img.image_id, img.name)));
            }
            Ok(ModelFiles {
                cameras: write_cameras_text(model).into_bytes(),
                images: write_images_text(model).into_bytes(),
                points3d: write_points_text(model).into_bytes(),
            })
        }
        ModelFormat::Binary => {
            if let Some(img) = model.images.values().find(|i| i.name.contains('\0')) {
                return Err(Error::Integrity(format!("image {}: name contains NUL", img.image_id)));
            }
            Ok(ModelFiles {
                cameras: write_cameras_binary(model),
                images: write_images_binary(model),
                points3d: write_points_binary(model),
            })
        }
    }
}

/// Binary when `cameras.bin` is present, text otherwise.
pub fn detect_format(dir: &Path) -> Result<ModelFormat> {
    if dir.join(CAMERAS_BIN).is_file() {
        Ok(ModelFormat::Binary)
    } else if dir.join(CAMERAS_TXT).is_file() {
        Ok(ModelFormat::Text)
    } else {
        Err(Error::Data(format!("{}: no {CAMERAS_BIN} or {CAMERAS_TXT}", dir.display())))
    }
}

pub fn read_model(dir: &Path) -> Result<ReconstructionModel> {
    let format = detect_format(dir)?;
    read_model_as(dir, format)
}

pub fn read_model_as(dir: &Path, format: ModelFormat) -> Result<ReconstructionModel> {
    parse_model(&ModelFiles::read_dir(dir, format)?, format).map_err(|e| match e {
        Error::Parse { file, location, reason } => {
            Error::Parse { file: dir.join(file).display().to_string(), location, reason }
        }
        other => other,
    })
}

pub fn read_model_text(dir: &Path) -> Result<ReconstructionModel> {
    read_model_as(dir, ModelFormat::Text)
}

pub fn read_model_binary(dir: &Path) -> Result<ReconstructionModel> {
    read_model_as(dir, ModelFormat::Binary)
}

pub fn write_model(model: &ReconstructionModel, dir: &Path, format: ModelFormat) -> Result<()> {
    serialize_model(model, format)?.write_dir(dir, format)
}

pub fn write_model_text(model: &ReconstructionModel, dir: &Path) -> Result<()> {
    write_model(model, dir, ModelFormat::Text)
}

pub fn write_model_binary(model: &ReconstructionModel, dir: &Path) -> Result<()> {
    write_model(model, dir, ModelFormat::Binary)
}

// ---------------------------------------------------------------- text

/// Data lines of a text file with 1-based line numbers. Images need the raw
/// line after each pose line, so this keeps every line.
struct TextLines<'a> {
    file: &'static str,
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> TextLines<'a> {
    fn new(file: &'static str, bytes: &'a [u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| Error::parse(file, Location::Byte(e.valid_up_to() as u64), "invalid UTF-8"))?;
        Ok(Self { file, lines: text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).collect(), pos: 0 })
    }

    /// Next non-empty, non-comment line.
    fn next_record(&mut self) -> Option<(usize, &'a str)> {
        while self.pos < self.lines.len() {
            let (n, l) = self.lines[self.pos];
            self.pos += 1;
            if !l.is_empty() && !l.starts_with('#') {
                return Some((n, l));
            }
        }
        None
    }

    /// The physical line that follows, whatever it holds.
    fn next_raw(&mut self) -> Option<(usize, &'a str)> {
        let l = self.lines.get(self.pos).copied();
        self.pos += 1;
        l
    }

    fn err(&self, line: usize, reason: impl Into<String>) -> Error {
        Error::parse(self.file, Location::Line(line), reason)
    }
}

struct Fields<'a, 'b> {
    it: std::str::SplitAsciiWhitespace<'a>,
    lines: &'b TextLines<'a>,
    line: usize,
}

impl<'a, 'b> Fields<'a, 'b> {
    fn new(lines: &'b TextLines<'a>, line: usize, text: &'a str) -> Self {
        Self { it: text.split_ascii_whitespace(), lines, line }
    }

    fn token(&mut self, what: &str) -> Result<&'a str> {
        self.it.next().ok_or_else(|| self.lines.err(self.line, format!("missing {what}")))
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let tok = self.token(what)?;
        tok.parse().map_err(|_| self.lines.err(self.line, format!("invalid {what} `{tok}`")))
    }

    fn rest(&mut self) -> Vec<&'a str> {
        self.it.by_ref().collect()
    }

    fn finish(&mut self) -> Result<()> {
        match self.it.next() {
            Some(t) => Err(self.lines.err(self.line, format!("unexpected trailing field `{t}`"))),
            None => Ok(()),
        }
    }
}

fn parse_f64(lines: &TextLines<'_>, line: usize, tok: &str, what: &str) -> Result<f64> {
    tok.parse().map_err(|_| lines.err(line, format!("invalid {what} `{tok}`")))
}

fn insert_unique<K: Ord + Copy + std::fmt::Display, V>(
    map: &mut BTreeMap<K, V>,
    key: K,
    value: V,
    err: impl FnOnce(String) -> Error,
) -> Result<()> {
    if map.insert(key, value).is_some() {
        return Err(err(format!("duplicate id {key}")));
    }
    Ok(())
}

fn parse_cameras_text(bytes: &[u8]) -> Result<BTreeMap<u32, ModelCamera>> {
    let mut lines = TextLines::new(CAMERAS_TXT, bytes)?;
    let mut out = BTreeMap::new();
    while let Some((n, l)) = lines.next_record() {
        let mut f = Fields::new(&lines, n, l);
        let camera_id: u32 = f.parse("camera id")?;
        let name = f.token("camera model")?;
        let model = CameraModel::from_name(name).ok_or_else(|| lines.err(n, format!("unknown camera model `{name}`")))?;
        let width = f.parse("width")?;
        let height = f.parse("height")?;
        let params = f.rest().into_iter().map(|t| parse_f64(&lines, n, t, "camera parameter")).collect::<Result<Vec<_>>>()?;
        if params.len() != model.num_params() {
            return Err(lines.err(n, format!("{} takes {} parameters, found {}", model.name(), model.num_params(), params.len())));
        }
        insert_unique(&mut out, camera_id, ModelCamera { camera_id, model, width, height, params }, |m| lines.err(n, m))?;
    }
    Ok(out)
}

fn parse_images_text(bytes: &[u8]) -> Result<BTreeMap<u32, ModelImage>> {
    let mut lines = TextLines::new(IMAGES_TXT, bytes)?;
    let mut out = BTreeMap::new();
    while let Some((n, l)) = lines.next_record() {
        let mut f = Fields::new(&lines, n, l);
        let image_id: u32 = f.parse("image id")?;
        let mut qvec = [0.0; 4];
        for (q, what) in qvec.iter_mut().zip(["QW", "QX", "QY", "QZ"]) {
            *q = f.parse(what)?;
        }
        let mut tvec = [0.0; 3];
        for (t, what) in tvec.iter_mut().zip(["TX", "TY", "TZ"]) {
            *t = f.parse(what)?;
        }
        let camera_id = f.parse("camera id")?;
        let name = f.token("image name")?.to_string();
        f.finish()?;
        // The points line may be empty, and may be missing at end of file.
        let mut points2d = Vec::new();
        if let Some((pn, pl)) = lines.next_raw() {
            let toks: Vec<&str> = pl.split_ascii_whitespace().collect();
            if !toks.len().is_multiple_of(3) {
                return Err(lines.err(pn, format!("points2D needs triples, found {} fields", toks.len())));
            }
            for t in toks.chunks_exact(3) {
                let x = parse_f64(&lines, pn, t[0], "point2D x")?;
                let y = parse_f64(&lines, pn, t[1], "point2D y")?;
                let point3d_id = match t[2] {
                    "-1" => None,
                    s => Some(
                        s.parse::<u64>()
                            .ok()
                            .filter(|&v| v != NO_POINT)
                            .ok_or_else(|| lines.err(pn, format!("invalid point3D id `{s}`")))?,
                    ),
                };
                points2d.push(Point2D { x, y, point3d_id });
            }
        }
        let image = ModelImage { image_id, qvec, tvec, camera_id, name, points2d };
        insert_unique(&mut out, image_id, image, |m| lines.err(n, m))?;
    }
    Ok(out)
}

fn parse_points_text(bytes: &[u8]) -> Result<BTreeMap<u64, ModelPoint3D>> {
    let mut lines = TextLines::new(POINTS_TXT, bytes)?;
    let mut out = BTreeMap::new();
    while let Some((n, l)) = lines.next_record() {
        let mut f = Fields::new(&lines, n, l);
        let point3d_id: u64 = f.parse("point3D id")?;
        if point3d_id == NO_POINT {
            return Err(lines.err(n, "reserved point3D id"));
        }
        let xyz = [f.parse("X")?, f.parse("Y")?, f.parse("Z")?];
        let rgb = [f.parse("R")?, f.parse("G")?, f.parse("B")?];
        let error = f.parse("error")?;
        let rest = f.rest();
        if !rest.len().is_multiple_of(2) {
            return Err(lines.err(n, "track needs (image id, point2D index) pairs"));
        }
        let mut track = Vec::with_capacity(rest.len() / 2);
        for p in rest.chunks_exact(2) {
            let image_id = p[0].parse().map_err(|_| lines.err(n, format!("invalid track image id `{}`", p[0])))?;
            let point2d_idx = p[1].parse().map_err(|_| lines.err(n, format!("invalid track point2D index `{}`", p[1])))?;
            track.push(TrackElement { image_id, point2d_idx });
        }
        insert_unique(&mut out, point3d_id, ModelPoint3D { point3d_id, xyz, rgb, error, track }, |m| lines.err(n, m))?;
    }
    Ok(out)
}

fn mean(total: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total as f64 / n as f64
    }
}

fn write_cameras_text(model: &ReconstructionModel) -> String {
    let mut s = String::from("# Camera list with one line of data per camera:\n#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    s.push_str(&format!("# Number of cameras: {}\n", model.cameras.len()));
    for c in model.cameras.values() {
        s.push_str(&format!("{} {} {} {}", c.camera_id, c.model.name(), c.width, c.height));
        for p in &c.params {
            s.push_str(&format!(" {p}"));
        }
        s.push('\n');
    }
    s
}

fn write_images_text(model: &ReconstructionModel) -> String {
    let observed: usize = model.images.values().map(|i| i.points2d.iter().filter(|p| p.point3d_id.is_some()).count()).sum();
    let mut s = String::from(
        "# Image list with two lines of data per image:\n#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n",
    );
    s.push_str(&format!(
        "# Number of images: {}, mean observations per image: {}\n",
        model.images.len(),
        mean(observed, model.images.len())
    ));
    for i in model.images.values() {
        let [qw, qx, qy, qz] = i.qvec;
        let [tx, ty, tz] = i.tvec;
        s.push_str(&format!("{} {qw} {qx} {qy} {qz} {tx} {ty} {tz} {} {}\n", i.image_id, i.camera_id, i.name));
        let pts: Vec<String> = i
            .points2d
            .iter()
            .map(|p| match p.point3d_id {
                Some(id) => format!("{} {} {id}", p.x, p.y),
                None => format!("{} {} -1", p.x, p.y),
            })
            .collect();
        s.push_str(&pts.join(" "));
        s.push('\n');
    }
    s
}

fn write_points_text(model: &ReconstructionModel) -> String {
    let track_total: usize = model.points3d.values().map(|p| p.track.len()).sum();
    let mut s = String::from(
        "# 3D point list with one line of data per point:\n#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n",
    );
    s.push_str(&format!(
        "# Number of points: {}, mean track length: {}\n",
        model.points3d.len(),
        mean(track_total, model.points3d.len())
    ));
    for p in model.points3d.values() {
        let [x, y, z] = p.xyz;
        let [r, g, b] = p.rgb;
        s.push_str(&format!("{} {x} {y} {z} {r} {g} {b} {}", p.point3d_id, p.error));
        for t in &p.track {
            s.push_str(&format!(" {} {}", t.image_id, t.point2d_idx));
        }
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------- binary

struct Reader<'a> {
    file: &'static str,
    cur: Cursor<&'a [u8]>,
}

impl<'a> Reader<'a> {
    fn new(file: &'static str, bytes: &'a [u8]) -> Self {
        Self { file, cur: Cursor::new(bytes) }
    }

    fn offset(&self) -> u64 {
        self.cur.position()
    }

    fn remaining(&self) -> u64 {
        self.cur.get_ref().len() as u64 - self.offset().min(self.cur.get_ref().len() as u64)
    }

    fn err(&self, at: u64, reason: impl Into<String>) -> Error {
        Error::parse(self.file, Location::Byte(at), reason)
    }

    fn read<T>(&mut self, what: &str, f: impl FnOnce(&mut Cursor<&'a [u8]>) -> std::io::Result<T>) -> Result<T> {
        let at = self.offset();
        f(&mut self.cur).map_err(|_| self.err(at, format!("unexpected end of file reading {what}")))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        self.read(what, |c| c.read_u8())
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        self.read(what, |c| c.read_u32::<LE>())
    }

    fn i32(&mut self, what: &str) -> Result<i32> {
        self.read(what, |c| c.read_i32::<LE>())
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        self.read(what, |c| c.read_u64::<LE>())
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        self.read(what, |c| c.read_f64::<LE>())
    }

    /// A record count, rejected early when the remaining bytes cannot hold it.
    fn count(&mut self, what: &str, min_record: u64) -> Result<usize> {
        let at = self.offset();
        let n = self.u64(what)?;
        if n.checked_mul(min_record).is_none_or(|need| need > self.remaining()) {
            return Err(self.err(at, format!("{what} {n} exceeds the remaining {} bytes", self.remaining())));
        }
        Ok(n as usize)
    }

    fn cstring(&mut self, what: &str) -> Result<String> {
        let at = self.offset();
        let data = *self.cur.get_ref();
        let start = at as usize;
        let len = data[start..].iter().position(|&b| b == 0).ok_or_else(|| self.err(at, format!("unterminated {what}")))?;
        let s = std::str::from_utf8(&data[start..start + len]).map_err(|_| self.err(at, format!("{what} is not UTF-8")))?;
        self.cur.set_position((start + len + 1) as u64);
        Ok(s.to_string())
    }

    fn finish(&self) -> Result<()> {
        if self.remaining() > 0 {
            return Err(self.err(self.offset(), format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

fn parse_cameras_binary(bytes: &[u8]) -> Result<BTreeMap<u32, ModelCamera>> {
    let mut r = Reader::new(CAMERAS_BIN, bytes);
    let n = r.count("camera count", 24)?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let at = r.offset();
        let camera_id = r.u32("camera id")?;
        let model_id = r.i32("camera model id")?;
        let model = CameraModel::from_id(model_id).ok_or_else(|| r.err(at + 4, format!("unknown camera model id {model_id}")))?;
        let width = r.u64("width")?;
        let height = r.u64("height")?;
        let params = (0..model.num_params()).map(|_| r.f64("camera parameter")).collect::<Result<Vec<_>>>()?;
        insert_unique(&mut out, camera_id, ModelCamera { camera_id, model, width, height, params }, |m| r.err(at, m))?;
    }
    r.finish()?;
    Ok(out)
}

fn parse_images_binary(bytes: &[u8]) -> Result<BTreeMap<u32, ModelImage>> {
    let mut r = Reader::new(IMAGES_BIN, bytes);
    let n = r.count("image count", 73)?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let at = r.offset();
        let image_id = r.u32("image id")?;
        let mut qvec = [0.0; 4];
        for q in &mut qvec {
            *q = r.f64("qvec")?;
        }
        let mut tvec = [0.0; 3];
        for t in &mut tvec {
            *t = r.f64("tvec")?;
        }
        let camera_id = r.u32("camera id")?;
        let name = r.cstring("image name")?;
        let np = r.count("points2D count", 24)?;
        let mut points2d = Vec::with_capacity(np);
        for _ in 0..np {
            let x = r.f64("point2D x")?;
            let y = r.f64("point2D y")?;
            let id = r.u64("point3D id")?;
            points2d.push(Point2D { x, y, point3d_id: (id != NO_POINT).then_some(id) });
        }
        let image = ModelImage { image_id, qvec, tvec, camera_id, name, points2d };
        insert_unique(&mut out, image_id, image, |m| r.err(at, m))?;
    }
    r.finish()?;
    Ok(out)
}

fn parse_points_binary(bytes: &[u8]) -> Result<BTreeMap<u64, ModelPoint3D>> {
    let mut r = Reader::new(POINTS_BIN, bytes);
    let n = r.count("point count", 51)?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let at = r.offset();
        let point3d_id = r.u64("point3D id")?;
        if point3d_id == NO_POINT {
            return Err(r.err(at, "reserved point3D id"));
        }
        let xyz = [r.f64("X")?, r.f64("Y")?, r.f64("Z")?];
        let rgb = [r.u8("R")?, r.u8("G")?, r.u8("B")?];
        let error = r.f64("error")?;
        let nt = r.count("track length", 8)?;
        let mut track = Vec::with_capacity(nt);
        for _ in 0..nt {
            track.push(TrackElement { image_id: r.u32("track image id")?, point2d_idx: r.u32("track point2D index")? });
        }
        insert_unique(&mut out, point3d_id, ModelPoint3D { point3d_id, xyz, rgb, error, track }, |m| r.err(at, m))?;
    }
    r.finish()?;
    Ok(out)
}

// Writes into a Vec<u8> cannot fail.
fn w_u32(b: &mut Vec<u8>, v: u32) {
    b.write_u32::<LE>(v).expect("vec write");
}
fn w_u64(b: &mut Vec<u8>, v: u64) {
    b.write_u64::<LE>(v).expect("vec write");
}
fn w_f64(b: &mut Vec<u8>, v: f64) {
    b.write_f64::<LE>(v).expect("vec write");
}

fn write_cameras_binary(model: &ReconstructionModel) -> Vec<u8> {
    let mut b = Vec::new();
    w_u64(&mut b, model.cameras.len() as u64);
    for c in model.cameras.values() {
        w_u32(&mut b, c.camera_id);
        b.write_i32::<LE>(c.model.id()).expect("vec write");
        w_u64(&mut b, c.width);
        w_u64(&mut b, c.height);
        c.params.iter().for_each(|&p| w_f64(&mut b, p));
    }
    b
}

fn write_images_binary(model: &ReconstructionModel) -> Vec<u8> {
    let mut b = Vec::new();
    w_u64(&mut b, model.images.len() as u64);
    for i in model.images.values() {
        w_u32(&mut b, i.image_id);
        i.qvec.iter().chain(&i.tvec).for_each(|&v| w_f64(&mut b, v));
        w_u32(&mut b, i.camera_id);
        b.extend_from_slice(i.name.as_bytes());
        b.push(0);
        w_u64(&mut b, i.points2d.len() as u64);
        for p in &i.points2d {
            w_f64(&mut b, p.x);
            w_f64(&mut b, p.y);
            w_u64(&mut b, p.point3d_id.unwrap_or(NO_POINT));
        }
    }
    b
}

fn write_points_binary(model: &ReconstructionModel) -> Vec<u8> {
    let mut b = Vec::new();
    w_u64(&mut b, model.points3d.len() as u64);
    for p in model.points3d.values() {
        w_u64(&mut b, p.point3d_id);
        p.xyz.iter().for_each(|&v| w_f64(&mut b, v));
        b.extend_from_slice(&p.rgb);
        w_f64(&mut b, p.error);
        w_u64(&mut b, p.track.len() as u64);
        for t in &p.track {
            w_u32(&mut b, t.image_id);
            w_u32(&mut b, t.point2d_idx);
        }
    }
    b
}
