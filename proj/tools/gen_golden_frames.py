#!/usr/bin/env python3
"""Writes tests/data/golden_frames: raw 47-byte frames plus a JSON manifest of
their fields, encoded independently of the C++ codec. Stdlib only."""
import binascii
import json
import random
import struct
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "golden_frames"
LAYOUT = "<2sBHI4f4B3ff"


def f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


def encode(fr):
    body = struct.pack(LAYOUT, b"HF", 1, fr["seq"], fr["timestamp_ms"], *fr["indentation_mm"], *fr["material_id"],
                       *fr["velocity_mm_s"], fr["angular_velocity_rad_s"])
    return body + struct.pack("<H", binascii.crc_hqx(body, 0xFFFF))


def main():
    rng = random.Random(47047)
    frames = [
        dict(seq=0, timestamp_ms=0, indentation_mm=[0, 0, 0, 0], material_id=[0, 0, 0, 0], velocity_mm_s=[0, 0, 0],
             angular_velocity_rad_s=0.0),
        dict(seq=1, timestamp_ms=20, indentation_mm=[2.5, 1.0, 0.0, 3.0], material_id=[0, 0, 0, 0],
             velocity_mm_s=[6.0, 0.0, 0.0], angular_velocity_rad_s=0.0),
        dict(seq=65535, timestamp_ms=4294967295, indentation_mm=[5.0, 5.0, 5.0, 5.0], material_id=[1, 2, 3, 0],
             velocity_mm_s=[-20.0, 0.5, -0.25], angular_velocity_rad_s=-1.0),
        dict(seq=32768, timestamp_ms=655360, indentation_mm=[0.125, 12.75, 0.0, 7.5], material_id=[3, 3, 3, 3],
             velocity_mm_s=[0.0, -7.0, 1.5], angular_velocity_rad_s=0.75),
    ]
    for _ in range(12):
        frames.append(dict(
            seq=rng.randrange(65536), timestamp_ms=rng.randrange(2 ** 32),
            indentation_mm=[f32(rng.uniform(0, 20)) for _ in range(4)],
            material_id=[rng.randrange(4) for _ in range(4)],
            velocity_mm_s=[f32(rng.uniform(-200, 200)) for _ in range(3)],
            angular_velocity_rad_s=f32(rng.uniform(-5, 5))))
    OUT.mkdir(parents=True, exist_ok=True)
    manifest = []
    for i, fr in enumerate(frames):
        name = f"frame_{i:02d}.bin"
        data = encode(fr)
        assert len(data) == 47
        (OUT / name).write_bytes(data)
        manifest.append(dict(file=name, hex=data.hex(), **fr))
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main()
