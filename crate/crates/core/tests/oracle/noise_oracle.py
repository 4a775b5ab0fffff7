"""Independent Monte-Carlo oracle for the noisy annotation threshold.

Re-implements hand forward kinematics, nail/palm sensor simulation and the
six-sensor annotator in numpy, with no code shared with the Rust crate, then
measures mean joint error and hard (beyond-tolerance) finger failures under
additive sensor noise.  The frozen threshold in tests/acceptance.rs comes from
running this script:

    python3 crates/core/tests/oracle/noise_oracle.py --frames 10000 --seed 7
"""
import argparse
import numpy as np

DEG = np.pi / 180.0

PALM = np.array([
    [0.0, 0.0, 0.0],      # W
    [30.0, 28.0, -8.0],   # M1
    [88.0, 22.0, 0.0],    # M2
    [92.0, 0.0, 0.0],     # M3
    [86.0, -19.0, 0.0],   # M4
    [78.0, -36.0, -2.0],  # M5
])
BONES = np.array([
    [35.0, 31.0, 24.0],
    [45.0, 25.0, 21.0],
    [49.0, 29.0, 22.0],
    [45.0, 28.0, 22.0],
    [36.0, 21.0, 19.0],
])
HALF = np.array([7.5, 6.5, 6.5, 6.0, 5.5])
S6_T = np.array([50.0, 0.0, 12.0])

# (lo, hi) per articulation angle, order: twist, flexion, abduction, pip, dip
LIMITS = np.array([[-15, 15], [-30, 100], [-25, 25], [0, 110], [-10, 90]]) * DEG


def rot_axis(axis, ang):
    axis = axis / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(ang) * k + (1 - np.cos(ang)) * k @ k


def rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def random_shape(rng):
    s = rng.uniform(0.85, 1.15)
    palm = PALM * s
    palm[1:] += rng.uniform(-2, 2, size=(5, 3))
    palm[3, 1:] = 0.0
    bones = BONES * s * rng.uniform(0.9, 1.1, size=(5, 3))
    half = HALF * rng.uniform(0.85, 1.15, size=5)
    lam = rng.uniform(0.35, 0.65, size=5)
    s6_r = rot_axis(rng.normal(size=3), rng.uniform(0, 10 * DEG))
    s6_t = S6_T * s + rng.uniform(-3, 3, size=3)
    return dict(palm=palm, bones=bones, half=half, lam=lam, s6_r=s6_r, s6_t=s6_t)


def fk(shape, R, t, angles):
    """angles: 5x5 rows per finger (twist, flexion, abduction, pip, dip)."""
    joints = {"W": R @ shape["palm"][0] + t}
    frames = []
    for f in range(5):
        m = shape["palm"][f + 1]
        x = m / np.linalg.norm(m)
        y = np.cross([0, 0, 1.0], x)
        y /= np.linalg.norm(y)
        z = np.cross(x, y)
        base = np.column_stack([x, y, z])
        tw, fl, ab, pip, dip = angles[f]
        f1 = base @ rz(ab) @ ry(fl) @ rx(tw)
        b1, b2, b3 = shape["bones"][f]
        p = m + f1[:, 0] * b1
        f2 = f1 @ ry(pip)
        d = p + f2[:, 0] * b2
        f3 = f2 @ ry(dip)
        tip = d + f3[:, 0] * b3
        for name, v in (("M", m), ("P", p), ("D", d), ("T", tip)):
            joints[f"{name}{f + 1}"] = R @ v + t
        frames.append(R @ f3)
    return joints, frames


def simulate(shape, R, t, joints, frames):
    nails = []
    for f in range(5):
        f3 = frames[f]
        v1 = f3[:, 0]
        v2 = -f3[:, 2]
        b3 = shape["bones"][f][2]
        l1 = shape["lam"][f] * b3
        pos = joints[f"T{f + 1}"] - l1 * v1 - shape["half"][f] * v2
        nails.append((pos, np.column_stack([v1, v2, np.cross(v1, v2)])))
    # S6 maps sensor-local -> tracker: G o s6_offset
    s6 = (R @ shape["s6_r"], R @ shape["s6_t"] + t)
    return nails, s6


def perturb(pos, rot, rng, sp, sr):
    return pos + rng.normal(scale=sp, size=3), expm(rng.normal(scale=sr, size=3)) @ rot


def expm(w):
    a = np.linalg.norm(w)
    if a == 0:
        return np.eye(3)
    return rot_axis(w, a)


def annotate(shape, nails, s6, tau):
    r6, t6 = s6
    # palm-local -> tracker = S6 o offset^-1
    g_r = r6 @ shape["s6_r"].T
    g_t = t6 - g_r @ shape["s6_t"]
    out = {"W": g_r @ shape["palm"][0] + g_t}
    failed = []
    for f in range(5):
        m = g_r @ shape["palm"][f + 1] + g_t
        pos, rot = nails[f]
        v1, v2, v3 = rot[:, 0], rot[:, 1], rot[:, 2]
        b1, b2, b3 = shape["bones"][f]
        l1 = shape["lam"][f] * b3
        l2 = b3 - l1
        r = shape["half"][f]
        tip = pos + l1 * v1 + r * v2
        d = pos - l2 * v1 + r * v2
        out[f"M{f + 1}"] = m
        md = d - m
        dist = np.linalg.norm(md)
        e = md / dist
        if dist > b1 + b2 + tau or dist < abs(b1 - b2) - tau:
            failed.append(f)
            continue
        n = np.cross(md, tip - m)
        if np.linalg.norm(n) < 1e-9 * dist * dist:
            n = v3 - np.dot(v3, e) * e
        if np.dot(n, v3) < 0:
            n = -n
        n /= np.linalg.norm(n)
        h = np.cross(e, n)
        if dist >= b1 + b2:
            p = m + b1 * e
        elif dist <= abs(b1 - b2):
            p = m + (b1 if b1 >= b2 else -b1) * e
        else:
            a = (dist * dist + b1 * b1 - b2 * b2) / (2 * dist)
            p = m + a * e + np.sqrt(max(b1 * b1 - a * a, 0.0)) * h
        out[f"P{f + 1}"], out[f"D{f + 1}"], out[f"T{f + 1}"] = p, d, tip
    return out, failed


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--sigma-pos", type=float, default=1.0)
    ap.add_argument("--sigma-rot-deg", type=float, default=1.0)
    ap.add_argument("--tau", type=float, default=2.0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    shapes = [random_shape(rng) for _ in range(5)]
    errs, hard, exact_max = [], 0, 0.0
    frames_with_failure = 0
    for i in range(args.frames):
        shape = shapes[i % 5]
        angles = rng.uniform(LIMITS[:, 0], LIMITS[:, 1], size=(5, 5))
        R = random_rotation(rng)
        t = rng.uniform(-100, 100, size=3)
        joints, frames = fk(shape, R, t, angles)
        nails, s6 = simulate(shape, R, t, joints, frames)
        clean, _ = annotate(shape, nails, s6, args.tau)
        exact_max = max(exact_max, max(np.linalg.norm(clean[k] - joints[k]) for k in joints))
        noisy_nails = [perturb(p, q, rng, args.sigma_pos, args.sigma_rot_deg * DEG) for p, q in nails]
        noisy_s6 = perturb(s6[1], s6[0], rng, args.sigma_pos, args.sigma_rot_deg * DEG)
        noisy_s6 = (noisy_s6[1], noisy_s6[0])
        est, failed = annotate(shape, noisy_nails, noisy_s6, args.tau)
        hard += len(failed)
        frames_with_failure += bool(failed)
        errs.extend(np.linalg.norm(est[k] - joints[k]) for k in est)
    errs = np.array(errs)
    print(f"noise-free max joint error: {exact_max:.3e} mm")
    print(f"noisy mean joint error:     {errs.mean():.4f} mm (p95 {np.percentile(errs, 95):.3f})")
    print(f"hard finger failures:       {hard} ({frames_with_failure} frames of {args.frames})")


if __name__ == "__main__":
    main()
