#!/usr/bin/env python3
"""Runs every trunc-ellipse subcommand and validates its JSON against the shipped schemas."""

import argparse
import json
import subprocess
import sys
from pathlib import Path

import jsonschema


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--exe", required=True)
    ap.add_argument("--schemas", required=True, type=Path)
    ap.add_argument("--data", required=True, type=Path)
    ap.add_argument("--work", required=True, type=Path)
    args = ap.parse_args()
    args.work.mkdir(parents=True, exist_ok=True)

    schemas = {p.name.removesuffix(".schema.json"): json.loads(p.read_text()) for p in args.schemas.glob("*.schema.json")}
    for s in schemas.values():
        jsonschema.Draft202012Validator.check_schema(s)
    failures = []

    def run(argv, expect_code=0):
        r = subprocess.run([args.exe, *argv], capture_output=True, text=True)
        if r.returncode != expect_code:
            failures.append(f"{' '.join(argv)}: exit {r.returncode}, expected {expect_code}\n{r.stderr}")
        return r

    def check(schema, argv, rerun=True):
        r = run(argv)
        if r.returncode != 0:
            return None
        try:
            doc = json.loads(r.stdout)
            jsonschema.validate(doc, schemas[schema])
        except (json.JSONDecodeError, jsonschema.ValidationError) as e:
            failures.append(f"{' '.join(argv)}: {e}")
            return None
        if rerun and run(argv).stdout != r.stdout:
            failures.append(f"{' '.join(argv)}: output differs between identical runs")
        print(f"ok  {schema:<11} {' '.join(argv)}")
        return doc

    model = str(args.data / "cohen_model.json")
    jsonschema.validate(json.loads(Path(model).read_text()), schemas["model"])

    csv = args.work / "sample.csv"
    check("sample", ["sample", "--model", model, "--n", "517", "--seed", "5", "--out", str(csv)], rerun=False)
    rows = csv.read_text().splitlines()
    if len(rows) != 517 or any(len(r.split(",")) != 2 for r in rows):
        failures.append("sample: expected 517 headerless two-column rows")
    data = args.work / "data.csv"
    data.write_text("w1,w2\n" + "\n".join(rows) + "\n")

    check("pdf", ["pdf", "--model", model, "--w", "165,80"])
    check("fit", ["fit", "--data", str(data), "--c1", "159.5", "--c2", "0"])
    check("fit", ["fit", "--data", str(data), "--c1", "159.5", "--c2", "-inf", "--restricted"])
    lrt = check("lrt", ["lrt", "--data", str(data), "--c1", "159.5", "--c2", "0"])
    if lrt and not lrt["p_value"] < 1e-4:
        failures.append(f"lrt: dependence not detected on simulated data (p = {lrt['p_value']})")
    polar = check("polar", ["polar", "--rho", "-0.70710678", "--generator", "gamma:2.275"])
    if polar and abs(polar["cov"]) > 1e-3:
        failures.append(f"polar: covariance {polar['cov']} is not close to 0")
    check("polar", ["polar", "--rho", "0.3", "--generator", "t:5"])
    check("zero-corr", ["zero-corr", "--rho", "-0.5"])
    check("zero-corr", ["zero-corr", "--rho", "0.95"])
    rect = check("rectprob", ["rectprob", "--mean", "0,0", "--sigma", "1,0,0,1", "--lower", "0,0"])
    if rect and abs(rect["value"] - 0.25) > 1e-10:
        failures.append(f"rectprob: {rect['value']} != 0.25")
    check("rectprob", ["rectprob", "--mean", "0,0,0,0", "--sigma", "1,.3,.3,.3,.3,1,.3,.3,.3,.3,1,.3,.3,.3,.3,1",
                       "--lower", "0,-inf,0,0", "--seed", "9"])
    for gen in ["normal", "t:4", "kotz:1:1:0.5", "gamma:2.275"]:
        check("regularity", ["regularity", "--generator", gen])
    for scenario in ["theorem1_one_sided.json", "theorem1_block.json", "corollary1_student_t.json"]:
        check("verify", ["verify", "--scenario", str(args.data / scenario), "--seed", "3"])

    run(["polar", "--rho", "0", "--no-such-flag"], expect_code=64)
    run(["polar", "--rho", "2"], expect_code=2)

    for f in failures:
        print("FAIL", f, file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
