//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::{golden, golden_dir, mutate, parse_never_panics, random_model, run_cli, snapshot};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vq3d::formats::{decode_pgm, to_json};
use vq3d::model_io::{parse_model, serialize_model, ModelFormat};
use vq3d::report::BenchReport;
use vq3d_core::colmap::{emit_mapper_command, MAPPER_FLAGS};
use vq3d_core::evaluation::{evaluate, percent, MetricThresholds};
use vq3d_core::frames::{blur_score, Aggregation, BoundingBox, GrayImage, ResponseTrack, TrackFrame};
use vq3d_core::geometry::{project, rotation_geodesic_angle, unproject, PointTransform, SimilarityTransform};
use vq3d_core::localization::{localize_query, QueryResult, VisualQuery};
use vq3d_core::registration::{register_submap, Method, PoseSet, PoseSource, RegistrationOptions};
use vq3d_core::synth::{generate_scene, random_similarity, render_observations};
use vq3d_core::{Direction, Intrinsics, PixelPoint, RigidPose, Vec3};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bench(args: &[&str]) -> Result<BenchReport, String> {
    let mut all = vec!["synth-bench", "--format", "json"];
    all.extend_from_slice(args);
    let (code, out, err) = run_cli(&all);
    check(code == 0, || format!("synth-bench exited {code}: {err}"))?;
    serde_json::from_str(&out).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- 1

fn oracle_closure() -> Outcome {
    let start = Instant::now();
    let r = bench(&["--seed", "0", "--seeds", "10"])?;
    let elapsed = start.elapsed();
    let row = &r.rows[0];
    let l2 = row.mean_l2.ok_or("no posed query")?;
    check(row.seeds.len() == 10, || format!("{} seeds", row.seeds.len()))?;
    check(row.qwp == 1.0 && row.succ == 1.0, || format!("QwP {} Succ {}", row.qwp, row.succ))?;
    check(l2 < 1e-6, || format!("mean L2 {l2:e}"))?;
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("10 seeds, {} queries, QwP=Succ=100%, mean L2 {l2:.1e} m, {elapsed:.2?}", row.n_queries))
}

// ---------------------------------------------------------------- 2

fn random_world(rng: &mut ChaCha8Rng, n: usize) -> PoseSet {
    let poses = (0..n).map(|i| {
        let t = Vec3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-3.0..3.0));
        let pose = RigidPose::new(random_similarity(rng, (1.0, 1.0)).rotation, t, Direction::CameraToWorld);
        (i as u64, pose)
    });
    PoseSet::from_poses("world", PoseSource::WorldAnchor, Direction::CameraToWorld, poses)
}

/// Submap poses whose submap-to-world transform is `g`, optionally from
/// world centers perturbed by `noise`.
fn submap_of(world: &PoseSet, g: &SimilarityTransform, noise: &[Vec3]) -> PoseSet {
    let inv = g.inverse();
    let poses = world.iter().map(|(f, p)| {
        let n = noise.get(f as usize).copied().unwrap_or_else(Vec3::zeros);
        let noisy = RigidPose::new(p.rotation, p.translation + n, Direction::CameraToWorld);
        (f, inv.apply_to_pose(&noisy).to_world_to_camera())
    });
    PoseSet::from_poses("submap", PoseSource::Reconstruction, Direction::WorldToCamera, poses)
}

fn transform_gap(a: &SimilarityTransform, b: &SimilarityTransform) -> f64 {
    let rot = rotation_geodesic_angle(&a.rotation, &b.rotation);
    let t = (a.translation - b.translation).norm() / (1.0 + b.translation.norm());
    (a.scale() - b.scale()).abs().max(rot).max(t)
}

fn transform_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let n = rng.random_range(3..30);
        let world = random_world(&mut rng, n);
        let rigid = random_similarity(&mut rng, (1.0, 1.0));
        for method in [Method::PerFrameMin, Method::LeastSquaresSim3] {
            let sub = submap_of(&world, &rigid, &[]);
            let rep = register_submap(&sub, &world, &RegistrationOptions::with_method(method)).map_err(|e| e.to_string())?;
            let gap = transform_gap(&rep.transform, &rigid);
            check(gap <= 1e-9, || format!("rigid trial {trial} {method:?}: {gap:e}"))?;
            worst = worst.max(gap);
        }
        let sim = random_similarity(&mut rng, (0.5, 2.0));
        let sub = submap_of(&world, &sim, &[]);
        let rep = register_submap(&sub, &world, &RegistrationOptions::with_method(Method::LeastSquaresSim3))
            .map_err(|e| e.to_string())?;
        let gap = transform_gap(&rep.transform, &sim);
        check(gap <= 1e-9, || format!("Sim(3) trial {trial}: {gap:e}"))?;
        worst = worst.max(gap);
    }

    // Center noise: error of the estimated map at the true centers, against 5 sigma.
    let mut within = BTreeMap::new();
    for trial in 0..100 {
        let sigma = [0.001, 0.003, 0.01][trial % 3];
        let normal = Normal::new(0.0, sigma).unwrap();
        let n = rng.random_range(20..40);
        let world = random_world(&mut rng, n);
        let noise: Vec<Vec3> =
            (0..n).map(|_| Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng))).collect();
        let cases = [(Method::LeastSquaresSim3, random_similarity(&mut rng, (0.5, 2.0))), (Method::PerFrameMin, random_similarity(&mut rng, (1.0, 1.0)))];
        for (method, g) in cases {
            let sub = submap_of(&world, &g, &noise);
            let clean = submap_of(&world, &g, &[]);
            let rep = register_submap(&sub, &world, &RegistrationOptions::with_method(method)).map_err(|e| e.to_string())?;
            let err = clean
                .iter()
                .map(|(_, p)| (rep.transform.transform_point(&p.camera_center()) - g.transform_point(&p.camera_center())).norm())
                .fold(0.0, f64::max);
            *within.entry(format!("{method:?}")).or_insert(0) += usize::from(err <= 5.0 * sigma);
        }
    }
    for (m, &k) in &within {
        check(k >= 95, || format!("{m}: {k}/100 noisy trials within 5 sigma"))?;
    }
    Ok(format!(
        "200 noiseless recoveries (worst {worst:.1e}); within 5 sigma: LeastSquaresSim3 {}/100, PerFrameMin {}/100",
        within["LeastSquaresSim3"], within["PerFrameMin"]
    ))
}

// ---------------------------------------------------------------- 3

fn filtering_monotonicity() -> Outcome {
    let thresholds = ["none", "3.5", "3", "2", "1.5", "1", "0.5", "0.25"];
    let joined = thresholds.join(",");
    // Per-frame registration with one or two anchors per submap, and
    // least squares with submaps long enough to span a trajectory corner.
    let sweeps: [(&str, &[&str]); 2] = [
        ("per-frame-min", &["--cuts", "10,20,30,40,50,60,70", "--anchor-stride", "7"]),
        ("least-squares-sim3", &["--cuts", "20,40,60", "--anchor-stride", "4", "--scale-range", "0.5,2"]),
    ];
    let mut lines = Vec::new();
    for (method, scene) in sweeps {
        let mut args = vec!["--seeds", "10", "--method", method, "--dropout", "0,0.3", "--filter-thresholds", &joined];
        args.extend_from_slice(scene);
        let r = bench(&args)?;
        for chunk in r.rows.chunks(thresholds.len()) {
            let posed: Vec<usize> = chunk.iter().map(|row| row.posed_frames).collect();
            check(posed.windows(2).all(|w| w[0] >= w[1]), || format!("{method}: posed frames not non-increasing: {posed:?}"))?;
            check(posed.iter().all(|&p| p <= posed[0]), || format!("{method}: none is not maximal: {posed:?}"))?;
            let qwp: Vec<f64> = chunk.iter().map(|row| row.qwp).collect();
            check(qwp.windows(2).all(|w| w[0] >= w[1]), || format!("{method}: QwP not non-increasing: {qwp:?}"))?;
            for row in chunk {
                check(row.succ <= row.qwp, || format!("{method}: Succ {} > QwP {}", row.succ, row.qwp))?;
            }
            lines.push(format!(
                "{method} dropout {}: posed {posed:?}, QwP {}% at none down to {}%",
                chunk[0].dropout,
                percent(qwp[0]),
                percent(*qwp.last().unwrap())
            ));
        }
    }
    Ok(lines.join("; "))
}

// ---------------------------------------------------------------- 4

fn count_inputs(n: usize, posed: usize, success: usize) -> (Vec<QueryResult>, Vec<VisualQuery>) {
    let bbox = BoundingBox::new(0.0, 0.0, 4.0, 4.0).unwrap();
    let gt = Vec3::new(1.0, 2.0, 3.0);
    let mut queries = Vec::new();
    let mut results = Vec::new();
    for i in 0..n {
        let id = format!("q{i:03}");
        queries.push(VisualQuery {
            query_id: id.clone(),
            clip_id: "clip".into(),
            query_frame: 10,
            object_id: "obj".into(),
            crop_path: None,
            track: ResponseTrack::new(vec![TrackFrame { frame_id: 1, bbox }]).unwrap(),
            gt_world: gt,
        });
        // posed failures miss by 100 m
        let pred = (i < posed).then(|| if i < success { gt } else { gt + Vec3::new(100.0, 0.0, 0.0) });
        results.push(QueryResult {
            query_id: id,
            has_pose: pred.is_some(),
            pred_vec_world: pred,
            pred_vec_q: pred,
            gt_vec_q: pred.map(|_| gt),
            used_frames: vec![],
            aggregation: Aggregation::Last,
            reason: None,
        });
    }
    (results, queries)
}

fn metric_arithmetic() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut seen = Vec::new();
    for (posed, success, qwp, succ) in [(40, 23, "15.15", "8.71"), (175, 68, "66.29", "25.76")] {
        let (results, queries) = count_inputs(264, posed, success);
        let s = evaluate(&results, &queries, &MetricThresholds::default()).map_err(|e| e.to_string())?;
        check(percent(s.qwp) == qwp && percent(s.succ) == succ, || {
            format!("({posed}, {success}): QwP {} Succ {}", percent(s.qwp), percent(s.succ))
        })?;
        // and through the evaluate verb
        let (r, q) = (tmp.path().join("r.json"), tmp.path().join("q.json"));
        fs::write(&r, to_json(&results)).map_err(|e| e.to_string())?;
        fs::write(&q, to_json(&queries)).map_err(|e| e.to_string())?;
        let (code, text, err) = run_cli(&["evaluate", "--results", r.to_str().unwrap(), "--queries", q.to_str().unwrap()]);
        check(code == 0, || err.clone())?;
        let metrics = text.lines().find(|l| l.trim_end().ends_with("264")).ok_or("no metrics row")?;
        let fields: Vec<&str> = metrics.split_whitespace().collect();
        check(fields[0] == qwp && fields[2] == succ, || format!("evaluate printed {metrics:?}"))?;
        seen.push(format!("({posed},{success})/264 -> QwP {qwp}% Succ {succ}%"));
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{}, {elapsed:.2?}", seen.join(", ")))
}

// ---------------------------------------------------------------- 5

fn unprojection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (w, h) = (rng.random_range(64..2000u32), rng.random_range(64..2000u32));
        let k = Intrinsics::new(
            rng.random_range(50.0..1500.0),
            rng.random_range(50.0..1500.0),
            rng.random_range(0.1..0.9) * f64::from(w),
            rng.random_range(0.1..0.9) * f64::from(h),
            w,
            h,
        )
        .unwrap();
        let px = PixelPoint::new(rng.random_range(0.0..f64::from(w)), rng.random_range(0.0..f64::from(h)));
        let d = rng.random_range(0.05..100.0);
        let x = unproject(px, d, &k).map_err(|e| e.to_string())?;
        let (back, depth) = project(&x, &k).map_err(|e| e.to_string())?;
        let gap = (back.u - px.u).abs().max((back.v - px.v).abs()).max((depth - d).abs());
        check(gap <= 1e-9, || format!("pixel {px:?} depth {d}: gap {gap:e}"))?;
        worst = worst.max(gap);
    }

    // Forward-rendered scenes with exact poses and depth; the expected
    // displacement is computed from raw matrices.
    let mut oracle: f64 = 0.0;
    let mut n = 0;
    for seed in 0..20 {
        let scene = generate_scene(seed, 60, 4).map_err(|e| e.to_string())?;
        let obs = render_observations(&scene);
        for q in &obs.queries {
            let p = scene.pose(q.query_frame).to_camera_to_world();
            let r = p.rotation.to_rotation_matrix();
            let expect = r.matrix().transpose() * (q.gt_world - p.translation);
            for mode in [Aggregation::Last, Aggregation::Average, Aggregation::Median] {
                let res = localize_query(q, &scene.trajectory, &obs.depths, &scene.intrinsics, mode);
                let got = res.pred_vec_q.ok_or_else(|| format!("{} unposed", q.query_id))?;
                let err = (got - expect).norm();
                check(err < 1e-6, || format!("seed {seed} {} {mode:?}: {err:e} m", q.query_id))?;
                oracle = oracle.max(err);
                n += 1;
            }
        }
    }
    Ok(format!("10^4 round trips (worst {worst:.1e}); {n} oracle localizations (worst {oracle:.1e} m)"))
}

// ---------------------------------------------------------------- 6

fn parser_round_trip() -> Outcome {
    for seed in 0..50 {
        let m = random_model(seed);
        for f in [ModelFormat::Text, ModelFormat::Binary] {
            let files = serialize_model(&m, f).map_err(|e| e.to_string())?;
            let back = parse_model(&files, f).map_err(|e| format!("seed {seed} {f:?}: {e}"))?;
            check(back == m, || format!("seed {seed} {f:?}: model changed"))?;
            check(serialize_model(&back, f).map_err(|e| e.to_string())? == files, || format!("seed {seed} {f:?}: bytes changed"))?;
        }
    }
    for f in [ModelFormat::Text, ModelFormat::Binary] {
        let files = golden(f);
        let m = parse_model(&files, f).map_err(|e| format!("golden {f:?}: {e}"))?;
        check(serialize_model(&m, f).map_err(|e| e.to_string())? == files, || format!("golden {f:?} not byte-exact"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xf022);
    let bases: Vec<[Vec<u8>; 3]> = [ModelFormat::Text, ModelFormat::Binary]
        .iter()
        .map(|&f| {
            let g = golden(f);
            [g.cameras, g.images, g.points3d]
        })
        .collect();
    let previous = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut crashes = 0;
    for i in 0..100_000 {
        let fi = i % 2;
        let which = (i / 2) % 3;
        let f = [ModelFormat::Text, ModelFormat::Binary][fi];
        let input = mutate(&mut rng, &bases[fi][which]);
        crashes += usize::from(!parse_never_panics(&input, which, f));
    }
    std::panic::set_hook(previous);
    check(crashes == 0, || format!("{crashes} fuzz inputs panicked"))?;
    Ok("50 models x 2 formats fixpoint, goldens byte-exact, 10^5 fuzz inputs, 0 crashes".into())
}

// ---------------------------------------------------------------- 7

fn mapper_command_exactness() -> Outcome {
    let golden = fs::read_to_string(golden_dir().join("mapper_argv.json")).map_err(|e| e.to_string())?;
    let argv = emit_mapper_command("clip/database.db", "clip/images", "clip/sparse");
    check(to_json(&argv) == golden, || format!("argv differs from golden: {argv:?}"))?;
    let mapper: Vec<(&str, &str)> = argv
        .chunks(2)
        .skip(1)
        .filter(|c| c[0].starts_with("--Mapper."))
        .map(|c| (c[0].as_str(), c[1].as_str()))
        .collect();
    let expected = [
        ("--Mapper.ba_global_max_num_iterations", "30"),
        ("--Mapper.ba_global_images_ratio", "1.4"),
        ("--Mapper.ba_global_max_refinement", "3"),
        ("--Mapper.ba_global_points_freq", "200000"),
    ];
    check(mapper == expected, || format!("mapper flags {mapper:?}"))?;
    check(MAPPER_FLAGS == expected, || "flag table differs".into())?;
    // the plan-sfm verb emits the same mapper command
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let clip = tmp.path().join("clip");
    fs::create_dir(&clip).map_err(|e| e.to_string())?;
    let (code, json, err) = run_cli(&["plan-sfm", clip.to_str().unwrap(), "--emit", "json"]);
    check(code == 0, || err.clone())?;
    let commands: Vec<Vec<String>> = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    let c = clip.to_str().unwrap();
    let want = emit_mapper_command(&format!("{c}/database.db"), &format!("{c}/images"), &format!("{c}/sparse"));
    check(commands.last() == Some(&want), || "plan-sfm mapper argv differs".into())?;
    Ok("4 flag/value pairs, argv byte-identical to golden".into())
}

// ---------------------------------------------------------------- 8

fn blur_metric() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let (w, h) = (rng.random_range(3..40), rng.random_range(3..40));
        let c = rng.random_range(0.0..=1.0);
        let s = blur_score(&GrayImage::new(w, h, vec![c; w * h]).unwrap()).map_err(|e| e.to_string())?;
        check(s == 0.0, || format!("constant {c} scored {s:e}"))?;
    }
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (w, h) = (rng.random_range(3..40), rng.random_range(3..40));
        let px: Vec<f64> = (0..w * h).map(|_| rng.random()).collect();
        let a = rng.random_range(0.01..=1.0);
        let base = blur_score(&GrayImage::new(w, h, px.clone()).unwrap()).unwrap();
        let scaled = blur_score(&GrayImage::new(w, h, px.iter().map(|v| a * v).collect()).unwrap()).unwrap();
        let rel = (scaled - a * a * base).abs() / (a * a * base);
        check(rel <= 1e-9, || format!("scale {a}: relative gap {rel:e}"))?;
        worst = worst.max(rel);
    }
    // Centred unit impulse in 5x5: interior responses -4 once and +1 four
    // times over 9 pixels, mean 0, variance 20/9.
    let mut px = vec![0.0; 25];
    px[12] = 1.0;
    let s = blur_score(&GrayImage::new(5, 5, px).unwrap()).unwrap();
    check((s - 20.0 / 9.0).abs() < 1e-12, || format!("5x5 impulse {s}"))?;
    // Off-centre impulse at (2, 2) of 6x6: same five responses over 16 pixels.
    let mut px = vec![0.0; 36];
    px[2 * 6 + 2] = 1.0;
    let s = blur_score(&GrayImage::new(6, 6, px).unwrap()).unwrap();
    check((s - 20.0 / 16.0).abs() < 1e-12, || format!("6x6 impulse {s}"))?;
    // Same impulse through the PGM decoder and blur-scores verb.
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut pgm = String::from("P2\n5 5\n255\n");
    for i in 0..25 {
        pgm.push_str(if i == 12 { "255\n" } else { "0\n" });
    }
    decode_pgm("impulse", pgm.as_bytes()).map_err(|e| e.to_string())?;
    fs::write(tmp.path().join("frame_000000.pgm"), &pgm).map_err(|e| e.to_string())?;
    let out = tmp.path().join("scores.csv");
    let (code, _, err) = run_cli(&["blur-scores", tmp.path().to_str().unwrap(), "--out", out.to_str().unwrap(), "--window", "1"]);
    check(code == 0, || err.clone())?;
    let scores = vq3d::formats::parse_blur_scores_csv("scores", &fs::read_to_string(&out).unwrap()).map_err(|e| e.to_string())?;
    check((scores[0].1 - 20.0 / 9.0).abs() < 1e-12, || format!("verb scored {}", scores[0].1))?;
    Ok(format!("constant 0, quadratic law worst {worst:.1e}, impulses 20/9 and 20/16"))
}

// ---------------------------------------------------------------- 9

/// Runs every verb from `dir` with relative paths so outputs can be compared
/// byte for byte across runs. Returns all stdout text and written files.
fn run_all_verbs(dir: &Path, jobs: &str) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let prev = std::env::current_dir().map_err(|e| e.to_string())?;
    std::env::set_current_dir(dir).map_err(|e| e.to_string())?;
    let result = (|| {
        fs::create_dir_all("clip").map_err(|e| e.to_string())?;
        let fx = "fx";
        let steps: Vec<Vec<&str>> = vec![
            vec!["plan-sfm", "clip", "--emit", "json"],
            vec!["plan-sfm", "clip"],
            vec![
                "synth", "--seed", "17", "--out", fx, "--cuts", "20,45", "--scale-range", "0.5,2", "--dropout", "0.2",
                "--center-noise", "0.005", "--rotation-noise", "0.002", "--depth-noise", "0.05", "--anchor-stride", "2", "--pgm",
            ],
            vec![
                "register", "fx/models/submap_0", "fx/models/submap_1", "fx/models/submap_2", "--anchor", "fx/anchor.json",
                "--out", "fx/poses.json", "--method", "least-squares-sim3", "--filter-threshold", "3",
            ],
            vec![
                "localize", "--queries", "fx/queries.json", "--poses", "fx/poses.json", "--depth-dir", "fx/depth",
                "--intrinsics", "fx/intrinsics.json", "--out", "fx/results.json", "--aggregation", "median",
            ],
            vec!["evaluate", "--results", "fx/results.json", "--queries", "fx/queries.json"],
            vec!["evaluate", "--results", "fx/results.json", "--queries", "fx/queries.json", "--format", "csv"],
            vec!["evaluate", "--results", "fx/results.json", "--queries", "fx/queries.json", "--format", "json"],
            vec![
                "synth-bench", "--seeds", "4", "--cuts", "40", "--dropout", "0,0.3", "--center-noise", "0,0.01",
                "--depth-noise", "0.1", "--filter-thresholds", "none,2", "--format", "json",
            ],
            vec!["blur-scores", "fx/frames", "--out", "blur.csv", "--window-out", "window.json", "--window", "4"],
        ];
        let mut stdout = String::new();
        for step in steps {
            let mut args = vec!["--jobs", jobs];
            args.extend(step.iter().copied());
            let (code, out, err) = run_cli(&args);
            check(code == 0, || format!("{step:?} exited {code}: {err}"))?;
            stdout.push_str(&out);
            stdout.push_str(&err);
        }
        fs::write("stdout.txt", stdout).map_err(|e| e.to_string())
    })();
    std::env::set_current_dir(prev).map_err(|e| e.to_string())?;
    result?;
    Ok(snapshot(dir))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = run_all_verbs(&tmp.path().join("a"), "1")?;
    let b = run_all_verbs(&tmp.path().join("b"), "1")?;
    let c = run_all_verbs(&tmp.path().join("c"), "8")?;
    for (name, other) in [("rerun", &b), ("--jobs 8", &c)] {
        check(a.keys().eq(other.keys()), || format!("{name}: different file sets"))?;
        if let Some((path, _)) = a.iter().find(|(p, bytes)| other[*p] != **bytes) {
            return Err(format!("{name}: {} differs", path.display()));
        }
    }
    let bytes: usize = a.values().map(Vec::len).sum();
    Ok(format!("7 verbs, {} files ({bytes} bytes) identical across reruns and --jobs 8", a.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle closure", oracle_closure),
        ("transform recovery", transform_recovery),
        ("filtering monotonicity", filtering_monotonicity),
        ("metric arithmetic", metric_arithmetic),
        ("unprojection", unprojection),
        ("parser round trip", parser_round_trip),
        ("mapper command", mapper_command_exactness),
        ("blur metric", blur_metric),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
