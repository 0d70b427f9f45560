#!/usr/bin/env python3
"""Runs the CLI on a few kernels, validates every report against
docs/report.schema.json and compares a normalized summary with tests/golden/.

usage: validate_reports.py AQED SOURCE_DIR [--update]
"""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

CHECK_MODES = ["--mode", "intra-fc", "--mode", "fc", "--mode", "strong-fc", "--mode", "fcd", "--mode", "sac"]

RUNS = {
    "none_s2_check": ["check", *CHECK_MODES, "corpus/none_s2_b4_w2_k2.abk"],
    "cross_lane_s1_check": ["check", *CHECK_MODES, "corpus/cross_lane_s1_b4_w2_k1.abk"],
    "consistent_wrong_s3_check": ["check", *CHECK_MODES, "corpus/consistent_wrong_s3_b3_w2_k1.abk"],
    "indexing_s1_oracle": ["check", "--backend", "oracle", "--mode", "intra-fc", "corpus/indexing_s1_b4_w2_k1.abk"],
    "init_s2_width4": ["check", "--width", "4", "--mode", "intra-fc", "corpus/init_s2_b4_w2_k2.abk"],
    "unresponsive_s1_rb": ["rb", "--bound", "64", "corpus/unresponsive_s1_b4_w2_k1.abk"],
    "none_s1_rb": ["rb", "--bound", "64", "--window", "4", "--delta", "2", "corpus/none_s1_b4_w2_k1.abk"],
    "aes_plan": ["plan", "kernels/aes_two_stage.abk"],
    "missing_file": ["check", "corpus/does_not_exist.abk"],
    "corpus_intra_fc": ["corpus", "run", "--manifest", "corpus/manifest.json", "--check", "intra-fc"],
}


def summarize(rep):
    s = {"kind": rep["kind"], "exit_code": rep["exit_code"]}
    if "error" in rep:
        s["error"] = rep["error"]["class"]
    if rep["kind"] == "check" and "results" in rep:
        s["counts"] = rep["counts"]
        s["results"] = [
            " ".join(str(x) for x in (r["target"], r["mode"], r.get("lane", ""), r["verdict"]) if x != "")
            for r in rep["results"]
        ]
    elif rep["kind"] == "rb" and "campaign" in rep:
        c = rep["campaign"]
        s["outcome"] = c["outcome"]
        s["lines"] = c["lines"]
        s["covered_lines"] = c["covered_lines"]
        s["windows"] = [f"{w['top']}-{w['bottom']} {w['phase']} {w['verdict']}" for w in c["windows"]]
    elif rep["kind"] == "plan":
        s["counts"] = rep["counts"]
        s["stages"] = rep["stages"]
    elif rep["kind"] == "corpus":
        s["agree"] = rep["agree"]
        s["disagree"] = rep["disagree"]
    return s


def main():
    aqed, src = sys.argv[1], Path(sys.argv[2])
    update = "--update" in sys.argv
    schema = json.loads((src / "docs/report.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    golden_dir = src / "tests/golden"
    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        for name, args in RUNS.items():
            report = Path(tmp) / f"{name}.json"
            proc = subprocess.run([aqed, *args, "--report", str(report)], cwd=src, capture_output=True, text=True)
            if not report.exists():
                print(f"FAIL {name}: no report (exit {proc.returncode})\n{proc.stderr}")
                failures += 1
                continue
            rep = json.loads(report.read_text())
            errs = sorted(validator.iter_errors(rep), key=str)
            if errs:
                print(f"FAIL {name}: schema: {errs[0].message} at {list(errs[0].absolute_path)}")
                failures += 1
            if rep["exit_code"] != proc.returncode:
                print(f"FAIL {name}: report exit_code {rep['exit_code']} but process exited {proc.returncode}")
                failures += 1
            summary = summarize(rep)
            golden = golden_dir / f"{name}.json"
            if update:
                golden.write_text(json.dumps(summary, indent=2) + "\n")
            elif json.loads(golden.read_text()) != summary:
                print(f"FAIL {name}: differs from golden\n  got: {json.dumps(summary)}")
                failures += 1
            else:
                print(f"ok   {name}")
    print(f"{len(RUNS)} runs, {failures} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
