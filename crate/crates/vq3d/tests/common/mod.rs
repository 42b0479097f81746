#![allow(dead_code)]

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vq3d::model_io::{parse_model, ModelFiles, ModelFormat};
use vq3d_core::colmap::{CameraModel, ModelCamera, ModelImage, ModelPoint3D, Point2D, ReconstructionModel, TrackElement};

pub const ALL_MODELS: [CameraModel; 11] = [
    CameraModel::SimplePinhole,
    CameraModel::Pinhole,
    CameraModel::SimpleRadial,
    CameraModel::Radial,
    CameraModel::OpenCv,
    CameraModel::OpenCvFisheye,
    CameraModel::FullOpenCv,
    CameraModel::Fov,
    CameraModel::SimpleRadialFisheye,
    CameraModel::RadialFisheye,
    CameraModel::ThinPrismFisheye,
];

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// A float spread across many magnitudes, including awkward ones for
/// shortest-repr printing.
fn any_float<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..6) {
        0 => 0.0,
        1 => f64::from(rng.random_range(-2000..2000)),
        2 => rng.random_range(-1.0..1.0),
        3 => rng.random_range(-1e4..1e4),
        4 => rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-300..300)),
        _ => f64::from_bits(rng.random::<u64>() & !(0x7ff << 52) | (rng.random_range(900u64..1100) << 52)),
    }
}

/// Random valid reconstruction: every reference resolves, every quaternion
/// is normalizable, names carry no whitespace.
pub fn random_model(seed: u64) -> ReconstructionModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = ReconstructionModel::default();
    let n_cams = rng.random_range(1..4);
    for _ in 0..n_cams {
        let id = loop {
            let id = rng.random_range(1..1000u32);
            if !m.cameras.contains_key(&id) {
                break id;
            }
        };
        let model = ALL_MODELS[rng.random_range(0..ALL_MODELS.len())];
        let params = (0..model.num_params()).map(|_| any_float(&mut rng)).collect();
        m.cameras.insert(
            id,
            ModelCamera { camera_id: id, model, width: rng.random_range(1..8000), height: rng.random_range(1..8000), params },
        );
    }
    let cam_ids: Vec<u32> = m.cameras.keys().copied().collect();
    let n_points = rng.random_range(0..30usize);
    let point_ids: Vec<u64> = (0..n_points).map(|i| i as u64 * 7 + rng.random_range(0..7)).collect();
    let n_images = rng.random_range(0..12);
    for k in 0..n_images {
        let id = k * 3 + 1;
        let qvec = loop {
            let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            if q.iter().map(|v| v * v).sum::<f64>() > 1e-3 {
                break q;
            }
        };
        let n2d = rng.random_range(0..10);
        let points2d = (0..n2d)
            .map(|_| Point2D {
                x: rng.random_range(0.0..4000.0),
                y: any_float(&mut rng),
                point3d_id: if point_ids.is_empty() || rng.random_bool(0.3) {
                    None
                } else {
                    Some(point_ids[rng.random_range(0..point_ids.len())])
                },
            })
            .collect();
        m.images.insert(
            id,
            ModelImage {
                image_id: id,
                qvec,
                tvec: std::array::from_fn(|_| any_float(&mut rng)),
                camera_id: cam_ids[rng.random_range(0..cam_ids.len())],
                name: format!("dir/frame_{:06}.{}", rng.random_range(0..100000), if rng.random_bool(0.5) { "jpg" } else { "png" }),
                points2d,
            },
        );
    }
    let observable: Vec<(u32, u32)> =
        m.images.values().flat_map(|i| (0..i.points2d.len() as u32).map(move |j| (i.image_id, j))).collect();
    for &pid in &point_ids {
        let track_len = if observable.is_empty() { 0 } else { rng.random_range(0..5) };
        let track = (0..track_len)
            .map(|_| {
                let (image_id, point2d_idx) = observable[rng.random_range(0..observable.len())];
                TrackElement { image_id, point2d_idx }
            })
            .collect();
        m.points3d.insert(
            pid,
            ModelPoint3D {
                point3d_id: pid,
                xyz: std::array::from_fn(|_| any_float(&mut rng)),
                rgb: rng.random(),
                error: rng.random_range(0.0..5.0),
                track,
            },
        );
    }
    m
}

/// Runs the CLI in-process; returns (exit code, stdout, stderr).
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("vq3d").chain(args.iter().copied());
    let code = vq3d::cli::main_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Every file under `dir` with its bytes, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn golden(format: ModelFormat) -> ModelFiles {
    let sub = match format {
        ModelFormat::Text => "model_text",
        ModelFormat::Binary => "model_bin",
    };
    ModelFiles::read_dir(&golden_dir().join(sub), format).unwrap()
}

pub fn parse_never_panics(bytes: &[u8], which: usize, f: ModelFormat) -> bool {
    let mut files = golden(f);
    let slot = match which {
        0 => &mut files.cameras,
        1 => &mut files.images,
        _ => &mut files.points3d,
    };
    *slot = bytes.to_vec();
    catch_unwind(AssertUnwindSafe(|| {
        let _ = parse_model(&files, f);
    }))
    .is_ok()
}

/// Random bytes, truncations, bit flips, spliced counts and hostile tokens.
pub fn mutate<R: Rng>(rng: &mut R, base: &[u8]) -> Vec<u8> {
    let mut v = base.to_vec();
    match rng.random_range(0..5) {
        0 => (0..rng.random_range(0..256)).map(|_| rng.random()).collect(),
        1 => {
            v.truncate(rng.random_range(0..=v.len()));
            v
        }
        2 => {
            for _ in 0..rng.random_range(1..8) {
                if !v.is_empty() {
                    let i = rng.random_range(0..v.len());
                    v[i] ^= 1 << rng.random_range(0..8);
                }
            }
            v
        }
        3 => {
            if v.len() >= 8 {
                let i = rng.random_range(0..v.len() - 7);
                v[i..i + 8].copy_from_slice(&rng.random::<u64>().to_le_bytes());
            }
            v
        }
        _ => {
            let tok: &[u8] = [&b" -1"[..], b" 1e400", b" nan", b"\n", b" 18446744073709551616", b" PINHOLE"][rng.random_range(0..6)];
            let i = rng.random_range(0..=v.len());
            v.splice(i..i, tok.iter().copied());
            v
        }
    }
}
