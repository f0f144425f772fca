#!/usr/bin/env python3
"""Regenerates data/demo. Deterministic; stdlib only."""
import csv
import json
import math
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "demo"
RATE = 90.0  # Hz, headset tracking rate

TABLE = {"min": [-0.3, -0.3, -0.1], "max": [0.3, 0.3, 0.0]}


def quat_x(angle):
    return (math.cos(angle / 2), math.sin(angle / 2), 0.0, 0.0)


def write_trajectory(path, duration, pose):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["time_s", "px", "py", "pz", "qw", "qx", "qy", "qz"])
        n = int(round(duration * RATE))
        for k in range(n + 1):
            t = k / RATE
            (x, y, z), q = pose(t)
            w.writerow([f"{t:.6f}", f"{x:.6f}", f"{y:.6f}", f"{z:.6f}"] + [f"{c:.9f}" for c in q])


def ramp(t, t0, t1, a, b):
    if t <= t0:
        return a
    if t >= t1:
        return b
    return a + (b - a) * (t - t0) / (t1 - t0)


def contact_pose(t):
    # Press flat, pitch so only the back pair stays in, then lift off.
    z = ramp(t, 0.2, 0.8, 0.010, -0.004) if t < 3.0 else ramp(t, 3.0, 3.5, -0.004, 0.010)
    tilt = ramp(t, 1.6, 2.0, 0.0, 0.30) if t < 2.6 else ramp(t, 2.6, 2.9, 0.30, 0.0)
    return (0.0, 0.0, z), quat_x(tilt)


def sliding_pose(t):
    z = ramp(t, 0.2, 0.6, 0.010, -0.005) if t < 3.6 else ramp(t, 3.6, 3.9, -0.005, 0.010)
    x = ramp(t, 0.8, 2.0, 0.0, 0.036)
    y = ramp(t, 2.2, 3.4, 0.0, -0.036)
    return (x, y, z), (1.0, 0.0, 0.0, 0.0)


def vibro_pose(t):
    # Touch stone, fabric and wood panels in turn, lifting between them.
    centers = [-0.10, 0.0, 0.10]
    seg = min(int(t // 1.5), 2)
    local = t - 1.5 * seg
    z = 0.010
    if 0.2 <= local < 1.2:
        z = ramp(local, 0.2, 0.35, 0.010, -0.005) if local < 1.05 else ramp(local, 1.05, 1.2, -0.005, 0.010)
    x = centers[seg] if local < 1.3 else ramp(local, 1.3, 1.5, centers[seg], centers[min(seg + 1, 2)])
    return (x, 0.0, z), (1.0, 0.0, 0.0, 0.0)


def synthetic_log(path, golden):
    rng = random.Random(20240611)
    patterns = list(range(1, 10))
    records = []
    counts = [[0] * 9 for _ in range(9)]
    for p, accuracy in (("P01", 0.92), ("P02", 0.98), ("P03", 0.88)):
        order = patterns * 5
        rng.shuffle(order)
        clock = 0.0
        for i, s in enumerate(order):
            r = s if rng.random() < accuracy else rng.choice([x for x in patterns if x != s])
            rt = round(rng.uniform(1.2, 3.8), 3)
            onset = round(clock, 3)
            records.append({"task": "patterns", "participant": p, "trial": i, "stimulus": s, "response": r,
                            "rt_s": rt, "onset_s": onset, "response_s": round(onset + rt, 3)})
            counts[s - 1][r - 1] += 1
            clock = onset + rt + 2.0
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")
    with open(golden, "w") as f:
        f.write("presented," + ",".join(str(i) for i in range(1, 10)) + ",abstained\n")
        for i, row in enumerate(counts):
            f.write(f"{i + 1}," + ",".join(str(c) for c in row) + ",0\n")


def lab_step(path):
    # First-order pressure-driven force with 64/11 ms 10-90 times, 1 kHz, light noise.
    rng = random.Random(7)
    tau_up, tau_down = 0.064 / math.log(9), 0.011 / math.log(9)
    f_ss = 9.0
    with open(path, "w") as f:
        f.write("time_s,force_n\n")
        force = 0.0
        for k in range(2000):
            t = k * 1e-3
            target = f_ss if 0.2 <= t < 1.2 else 0.0
            tau = tau_up if target > force else tau_down
            force = target + (force - target) * math.exp(-1e-3 / tau)
            f.write(f"{t:.3f},{force + rng.gauss(0, 0.01):.5f}\n")


def lab_sweep(path):
    # Amplitudes of a first-order system with tau = 20 ms.
    tau = 0.020
    with open(path, "w") as f:
        f.write("freq_hz,amplitude\n")
        for i in range(30):
            freq = 10 ** (2 * i / 29)
            f.write(f"{freq:.6f},{5.0 / math.sqrt(1 + (2 * math.pi * freq * tau) ** 2):.8f}\n")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    scene = {"objects": [dict(TABLE, material="neutral")]}
    (OUT / "contact_scene.json").write_text(json.dumps(scene, indent=2) + "\n")
    (OUT / "sliding_scene.json").write_text(json.dumps(scene, indent=2) + "\n")
    panels = [("stone", -0.10), ("fabric", 0.0), ("wood", 0.10)]
    vibro = {"objects": [{"min": [c - 0.045, -0.05, -0.05], "max": [c + 0.045, 0.05, 0.0], "material": m}
                         for m, c in panels]}
    (OUT / "vibro_scene.json").write_text(json.dumps(vibro, indent=2) + "\n")
    write_trajectory(OUT / "contact_trajectory.csv", 4.0, contact_pose)
    write_trajectory(OUT / "sliding_trajectory.csv", 4.2, sliding_pose)
    write_trajectory(OUT / "vibro_trajectory.csv", 4.5, vibro_pose)
    synthetic_log(OUT / "patterns_log.jsonl", OUT / "patterns_expected_confusion.csv")
    lab_step(OUT / "lab_step.csv")
    lab_sweep(OUT / "lab_sweep.csv")
    patterns = {"patterns": {"1": [1], "2": [2], "3": [3], "4": [4], "5": [1, 2], "6": [3, 4], "7": [1, 3],
                             "8": [2, 4], "9": [1, 2, 3, 4]}}
    (OUT / "patterns.json").write_text(json.dumps(patterns, indent=2) + "\n")
    config = {"seed": 1, "sensor": {"noise_fraction": 0.02}, "task": {"patterns_file": "patterns.json"},
              "service": {"port": 8080, "log_dir": "logs"}}
    (OUT / "config.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
