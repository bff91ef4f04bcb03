"""CLI integration checks: subcommands, exit codes, output shapes."""

import base64
import json
import struct
import subprocess
import sys
import tempfile
from pathlib import Path

SUFFIX_A = "magnets hold the painted wooden door against winter storms tonight."
SUFFIX_B = "sailors counted bright lanterns across the harbor wall at dusk."


def run(binary, *args, expect=0):
    proc = subprocess.run([binary, *args], capture_output=True, text=True)
    assert proc.returncode == expect, (
        f"{args} exited {proc.returncode} (wanted {expect})\n"
        f"stdout: {proc.stdout}\nstderr: {proc.stderr}"
    )
    return proc


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def main():
    binary = sys.argv[1]
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        corpus = tmp / "corpus.jsonl"
        gens = tmp / "gens.jsonl"
        write_jsonl(
            corpus,
            [
                {"id": "doc-a", "input": "alpha beta gamma delta epsilon " + SUFFIX_A},
                {"id": "doc-b", "input": "zeta eta theta iota kappa " + SUFFIX_B},
            ],
        )
        write_jsonl(
            gens,
            [
                {"id": "doc-a", "generation": SUFFIX_A},
                {"id": "doc-b", "generation": "totally unrelated words about quantum pasta."},
            ],
        )

        run(binary, "--help")
        run(binary, expect=1)
        run(binary, "bogus", expect=1)

        # audit: report to stdout and to a file, config file + flag overrides
        report = tmp / "report.json"
        common = [
            "audit",
            "--corpus_path", str(corpus),
            "--generations_path", str(gens),
            "--k_prefix_tokens", "5",
            "--align.min_match_chars", "40",
            "--bootstrap_resamples", "50",
        ]
        proc = run(binary, *common)
        doc = json.loads(proc.stdout)
        assert doc["counts"]["verbatim"] == 1 and doc["n"] == 2

        run(binary, *common, "--report_path", str(report))
        stored = json.loads(report.read_text())
        assert stored["counts"] == doc["counts"]
        assert stored["config"]["k_prefix_tokens"] == 5

        config_file = tmp / "audit.json"
        config_file.write_text(
            json.dumps(
                {
                    "corpus_path": str(corpus),
                    "generations_path": str(gens),
                    "k_prefix_tokens": 5,
                    "align": {"min_match_chars": 40},
                    "bootstrap_resamples": 50,
                }
            )
        )
        proc = run(binary, "audit", "--config", str(config_file), "--seed", "9")
        doc = json.loads(proc.stdout)
        assert doc["seed"] == 9 and doc["counts"]["verbatim"] == 1

        run(binary, "audit", "--corpus_path", "missing.jsonl",
            "--generations_path", str(gens), expect=2)

        # report re-rendering
        proc = run(binary, "report", "--in", str(report), "--format", "text")
        assert "Verbatim" in proc.stdout
        proc = run(binary, "report", "--in", str(report), "--format", "csv")
        assert proc.stdout.startswith("metric,count,rate")
        run(binary, "report", "--in", str(corpus), expect=1)

        # index build + persist
        index_file = tmp / "suffixes.idx"
        run(binary, "index", "--corpus_path", str(corpus), "--out", str(index_file),
            "--k_prefix_tokens", "5")
        assert index_file.stat().st_size > 0

        # attention metrics
        tensor = tmp / "attn.tensor"
        flat = [0.25] * (2 * 3 * 4)
        header = json.dumps(
            {"shape": [2, 3, 4], "layer": 1, "sample_id": "s0", "kind": "cross"}
        )
        payload = base64.b64encode(struct.pack("<%df" % len(flat), *flat)).decode()
        tensor.write_text(header + "\n" + payload + "\n")
        heatmaps = tmp / "heatmaps"
        proc = run(binary, "attention", str(tensor), "--heatmap_dir", str(heatmaps))
        doc = json.loads(proc.stdout)
        assert abs(doc["average"]["normalized_entropy_mean"] - 1.0) < 1e-9
        assert doc["layer"] == 1
        assert (heatmaps / "average.csv").exists()
        run(binary, "attention", str(corpus), expect=1)

        # simulate: records parse, determinism, validation
        proc = run(binary, "simulate", "--seeds", "2", "--steps", "40")
        lines = [json.loads(line) for line in proc.stdout.splitlines()]
        assert len(lines) == 2
        assert all(record["closed_form"]["pass"] for record in lines)
        proc2 = run(binary, "simulate", "--seeds", "2", "--steps", "40")
        assert proc.stdout == proc2.stdout
        run(binary, "simulate", "--seeds", "1", "--k_feat", "20", expect=1)

        results = tmp / "runs.jsonl"
        run(binary, "simulate", "--seeds", "1", "--steps", "30", "--out", str(results))
        run(binary, "simulate", "--seeds", "1", "--steps", "30", "--out", str(results))
        appended = [json.loads(line) for line in results.read_text().splitlines()]
        assert len(appended) == 2 and appended[0] == appended[1]

    print("cli tests passed")


if __name__ == "__main__":
    main()
