#!/usr/bin/env python3
"""Writes the golden model files and mapper argv used by the vq3d tests.

Independent of the Rust writers: the layouts here follow the COLMAP
documentation. Floats are chosen so that Python's shortest repr equals
Rust's `{}` output (integral values print without a fractional part).
"""
import json
import os
import struct

HERE = os.path.dirname(os.path.abspath(__file__))

CAMERAS = [
    # id, model name, model id, width, height, params
    (1, "PINHOLE", 1, 640, 480, [525.5, 525.25, 320, 240]),
    (2, "SIMPLE_RADIAL", 2, 1920, 1080, [1400.125, 960.5, 540, -0.0625]),
]

IMAGES = [
    # id, qvec (w, x, y, z), tvec, camera id, name, points2D (x, y, point3D id or None)
    (1, [1, 0, 0, 0], [0, 0, 0], 1, "frame_000000.jpg",
     [(100.5, 200.25, 1), (10, 20, None), (300.75, 40.5, 2)]),
    (2, [0.5, 0.5, -0.5, 0.5], [1.5, -2.25, 3.125], 1, "frame_000007.jpg",
     [(50.5, 60.5, 1), (70.25, 80.125, 3)]),
    (5, [0.9, 0.1, 0.2, 0.3], [-0.001, 12, 7.5], 2, "frame_000012.png", []),
]

POINTS = [
    # id, xyz, rgb, error, track (image id, point2D idx)
    (1, [0.25, -1.5, 4.125], [255, 128, 0], 0.75, [(1, 0), (2, 0)]),
    (2, [1, 2, 3], [0, 0, 0], 1.5, [(1, 2)]),
    (3, [-3.5, 0.0625, 10], [12, 34, 56], 0.125, [(2, 1)]),
    (9, [7, 8, 9], [1, 2, 3], 0, []),
]

MAPPER_FLAGS = [
    ("--Mapper.ba_global_max_num_iterations", "30"),
    ("--Mapper.ba_global_images_ratio", "1.4"),
    ("--Mapper.ba_global_max_refinement", "3"),
    ("--Mapper.ba_global_points_freq", "200000"),
]


def fmt(x):
    x = float(x)
    if x == int(x):
        return str(int(x))
    s = repr(x)
    assert "e" not in s, s
    return s


def mean(total, n):
    return fmt(total / n) if n else "0"


def cameras_txt():
    out = ["# Camera list with one line of data per camera:",
           "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]",
           "# Number of cameras: %d" % len(CAMERAS)]
    for cid, name, _, w, h, params in CAMERAS:
        out.append(" ".join([str(cid), name, str(w), str(h)] + [fmt(p) for p in params]))
    return "\n".join(out) + "\n"


def images_txt():
    observed = sum(1 for img in IMAGES for p in img[5] if p[2] is not None)
    out = ["# Image list with two lines of data per image:",
           "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME",
           "#   POINTS2D[] as (X, Y, POINT3D_ID)",
           "# Number of images: %d, mean observations per image: %s" % (len(IMAGES), mean(observed, len(IMAGES)))]
    for iid, q, t, cid, name, pts in IMAGES:
        out.append(" ".join([str(iid)] + [fmt(v) for v in q + t] + [str(cid), name]))
        out.append(" ".join("%s %s %s" % (fmt(x), fmt(y), "-1" if p is None else p) for x, y, p in pts))
    return "\n".join(out) + "\n"


def points_txt():
    total = sum(len(p[4]) for p in POINTS)
    out = ["# 3D point list with one line of data per point:",
           "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)",
           "# Number of points: %d, mean track length: %s" % (len(POINTS), mean(total, len(POINTS)))]
    for pid, xyz, rgb, err, track in POINTS:
        fields = [str(pid)] + [fmt(v) for v in xyz] + [str(c) for c in rgb] + [fmt(err)]
        fields += ["%d %d" % el for el in track]
        out.append(" ".join(fields))
    return "\n".join(out) + "\n"


def cameras_bin():
    b = struct.pack("<Q", len(CAMERAS))
    for cid, _, mid, w, h, params in CAMERAS:
        b += struct.pack("<IiQQ", cid, mid, w, h)
        b += struct.pack("<%dd" % len(params), *params)
    return b


def images_bin():
    b = struct.pack("<Q", len(IMAGES))
    for iid, q, t, cid, name, pts in IMAGES:
        b += struct.pack("<I7dI", iid, *(q + t), cid)
        b += name.encode() + b"\0"
        b += struct.pack("<Q", len(pts))
        for x, y, p in pts:
            b += struct.pack("<ddQ", x, y, 2**64 - 1 if p is None else p)
    return b


def points_bin():
    b = struct.pack("<Q", len(POINTS))
    for pid, xyz, rgb, err, track in POINTS:
        b += struct.pack("<Q3d3BdQ", pid, *xyz, *rgb, err, len(track))
        for el in track:
            b += struct.pack("<II", *el)
    return b


def write(rel, data):
    path = os.path.join(HERE, rel)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode) as f:
        f.write(data)


def main():
    write("model_text/cameras.txt", cameras_txt())
    write("model_text/images.txt", images_txt())
    write("model_text/points3D.txt", points_txt())
    write("model_bin/cameras.bin", cameras_bin())
    write("model_bin/images.bin", images_bin())
    write("model_bin/points3D.bin", points_bin())
    argv = ["colmap", "mapper"]
    for flag, value in MAPPER_FLAGS:
        argv += [flag, value]
    argv += ["--database_path", "clip/database.db", "--image_path", "clip/images", "--output_path", "clip/sparse"]
    write("mapper_argv.json", json.dumps(argv, indent=2) + "\n")


if __name__ == "__main__":
    main()
