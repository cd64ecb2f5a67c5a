#!/usr/bin/env python3
"""Smoke test for the losmap Python bindings.

Build the extension first:  ./python/build_bindings.sh
Then run:                   python3 python/smoke_test.py
"""
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import losmap


def check(name, cond):
    status = "ok" if cond else "FAIL"
    print(f"  [{status}] {name}")
    if not cond:
        sys.exit(f"smoke test failed at: {name}")


def main():
    print("losmap python smoke test")

    # Mirror-kernel inversion: gamma=2, radii 10 and 5 -> 10 and 15.
    inv = losmap.invert([(10.0, 0.0, 0.0), (5.0, 0.0, 0.0)], 2.0)
    check("invert formula", abs(inv[0][0] - 10.0) < 1e-9 and abs(inv[1][0] - 15.0) < 1e-9)

    # Convex hull of a cube: 8 vertices, 12 triangles.
    cube = [(x, y, z) for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)]
    verts, faces = losmap.convex_hull(cube)
    check("cube hull", len(verts) == 8 and len(faces) == 12)

    # Mesh a synthetic wall patch and inspect weights/normals.
    wall = [(8.0, 0.05 * iy, 0.12 * iz) for iy in range(-20, 21) for iz in range(-8, 9)]
    fm = losmap.mesh_frame(wall)
    check("wall meshes", fm.surface_face_count() > 100)
    normals = [n for n in fm.point_normals() if n is not None]
    ok = sum(1 for n in normals if abs(n[0]) > 0.99)
    check("wall normals point at sensor", ok > 0.9 * len(normals))

    # Simulate a room and run the incremental pipeline. Walls sit at
    # ±5.12 / z in [-0.13, 3.12]: away from the voxel-lattice resonance.
    scene = "room 0 0 1.495 10.24 10.24 3.25\n"
    traj = "0.0 0 0 1.5 0 0 0 1\n10.0 0 0 1.5 0 0 0 1\n"
    scanner = "\n".join(
        [
            "ring_count = 8",
            "horiz_res_deg = 1.5",
            "sigma = 0.01",
            "max_range = 100",
        ]
    )
    frames = losmap.simulate(scene, traj, 6, 42, scanner)
    check("simulate frame count", len(frames) == 6)
    check("simulate points", len(frames[0]["points"]) > 1000)

    pipe = losmap.Pipeline(update_radius=12.0)
    dynamic = total = 0
    for f in frames:
        out = pipe.process_frame(f["timestamp"], f["pose"], f["points"])
        dynamic += sum(1 for v in out["labels"] if v == 1)
        total += len(out["labels"])
    check("static scene stays static", dynamic < 0.005 * total)
    # Mid-room at scanner height (inside the beam band) reads free; just
    # behind a wall reads occupied.
    check("free space mid-room", pipe.is_free(2.0, 0.0, 1.5) == "free")
    check("occupied behind wall", pipe.is_free(5.2, 0.0, 1.5) == "occupied")
    check("field populated", pipe.field_voxel_count() > 1000)

    mesh_verts, mesh_faces = pipe.static_mesh()
    check("static mesh extracted", len(mesh_faces) > 100)

    # Mesh vertices should hug the room surfaces.
    m = losmap.cloud_metrics(mesh_verts, wall_samples(), 0.25)
    check("static mesh near surfaces", m["precision"] > 80.0)

    # Normal accuracy vs the 10-NN PCA baseline on a realistic ring
    # pattern (0.2° azimuth vs 2° ring spacing). PCA neighborhoods on such
    # anisotropic sweeps degenerate to along-ring line segments.
    ring_frame = losmap.simulate(scene, traj, 1, 43)[0]
    est = losmap.mesh_frame(ring_frame["points"]).point_normals()
    ours = losmap.normal_similarity(est, ring_frame["gt_normals"])
    pca = losmap.normal_similarity(
        losmap.pca_normals(ring_frame["points"], 10), ring_frame["gt_normals"]
    )
    print(f"  normal similarity: ours {ours:.4f}, pca {pca:.4f}")
    check("mean cosine at least 0.95", ours >= 0.95)
    check("beats pca baseline", ours > pca)

    print("all smoke checks passed")


def wall_samples():
    """Regular samples of the smoke-test room's inner surfaces."""
    pts = []
    hx = hy = 10.24 / 2.0
    z_lo, z_hi = -0.13, 3.12
    step = 0.25
    n = int(2 * hx / step)
    nz = int((z_hi - z_lo) / step)
    for i in range(n + 1):
        u = -hx + i * step
        for j in range(n + 1):
            v = -hy + j * step
            pts.append((u, v, z_lo))
            pts.append((u, v, z_hi))
        for kz in range(nz + 1):
            w = z_lo + kz * step
            pts.append((u, -hy, w))
            pts.append((u, hy, w))
            pts.append((-hx, u, w))
            pts.append((hx, u, w))
    return pts


if __name__ == "__main__":
    main()
