"""End-to-end checks of the ptkit command-line tool.

Usage: cli_smoke.py <path to ptkit binary>
"""

import json
import random
import subprocess
import sys
import tempfile
from pathlib import Path

BIN = sys.argv[1]


def run(*args, expect=0):
    proc = subprocess.run([BIN, *args], capture_output=True, text=True)
    if proc.returncode != expect:
        sys.exit(f"{args}: exit {proc.returncode}, expected {expect}\n{proc.stdout}{proc.stderr}")
    return proc


def write_ply(path, n, rng):
    lines = ["ply", "format ascii 1.0", f"element vertex {n}",
             "property float x", "property float y", "property float z", "property int label", "end_header"]
    for _ in range(n):
        x, y, z = rng.uniform(0, 8), rng.uniform(0, 8), rng.uniform(0, 2)
        lines.append(f"{x:.4f} {y:.4f} {z:.4f} {int(x // 4)}")
    path.write_text("\n".join(lines) + "\n")


def main():
    rng = random.Random(5)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cloud = tmp / "scene.ply"
        write_ply(cloud, 3000, rng)
        log = tmp / "metrics.jsonl"

        run("preprocess", str(cloud), str(tmp / "scene.tp3c"))
        spheres = json.loads(run("--seed", "3", "sample", str(tmp / "scene.tp3c"), "--count", "4").stdout)
        assert len(spheres) == 4, spheres

        template = tmp / "uniform.tp3p"
        run("sample", str(cloud), "--inference", "--classes", "2", "-o", str(template))
        seg = json.loads(run("--log", str(log), "evaluate-seg", str(cloud), str(template), str(template)).stdout)
        assert seg["task"] == "segmentation" and seg["metrics"]["points"] == 3000, seg
        # Uniform probabilities resolve to class 0 everywhere.
        assert seg["metrics"]["uncovered_points"] == 0

        box = {"min": [0, 0, 0], "max": [1, 1, 1], "class": 0}
        records = tmp / "det.json"
        records.write_text(json.dumps([{"ground_truth": [box], "predictions": [dict(box, score=0.7)]}]))
        det = json.loads(run("--log", str(log), "evaluate-det", str(records)).stdout)
        assert det["metrics"]["mAP@0.5"] == 1.0, det

        reg = json.loads(run("--log", str(log), "--seed", "11", "register", "--synthetic", "3").stdout)
        assert reg["metrics"]["success_rate"] == 1.0 and reg["seed"] == 11, reg

        entries = [json.loads(line) for line in log.read_text().splitlines()]
        assert [e["task"] for e in entries] == ["segmentation", "detection", "registration"], entries
        for e in entries:
            assert set(e) == {"timestamp", "config_hash", "seed", "task", "metrics"}, e
            assert e["timestamp"].endswith("Z") and len(e["config_hash"]) == 16

        bench = json.loads(run("--workers", "2", "bench", "--points", "20000").stdout)
        assert bench["batches"] > 0, bench

        err = run("evaluate-seg", str(cloud), str(records), expect=1)
        assert err.stderr.startswith("error: "), err.stderr
        (tmp / "bad.yaml").write_text("protocol: {radius: 1}\n")
        err = run("--config", str(tmp / "bad.yaml"), "sample", str(cloud), expect=1)
        assert "protocol: unknown key 'radius'" in err.stderr, err.stderr
    print("cli smoke checks passed")


if __name__ == "__main__":
    main()
