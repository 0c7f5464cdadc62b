"""Exit codes and outputs of the hvsim command line tool."""

import pathlib
import subprocess
import sys
import tempfile

exe, configs = sys.argv[1], pathlib.Path(sys.argv[2])
failures = []


def expect(args, code, needle=None):
    proc = subprocess.run([exe, *args], capture_output=True, text=True)
    out = proc.stdout + proc.stderr
    if proc.returncode != code or (needle and needle not in out):
        failures.append(f"{args}: exit {proc.returncode} (want {code})\n{out}")
    return out


with tempfile.TemporaryDirectory() as tmp:
    tmp = pathlib.Path(tmp)
    for cfg in sorted(configs.glob("*.yaml")):
        expect(["validate-config", str(cfg)], 0, ": ok")

    expect([], 1)
    expect(["run"], 1)
    expect(["frobnicate"], 1)
    expect(["--help"], 0)

    bad = tmp / "bad.yaml"
    bad.write_text("scenario: aerial_bs\nradio: {bandwith: 1}\n")
    expect(["validate-config", str(bad)], 2, "radio.bandwith: unknown key")
    expect(["run", "-c", str(bad)], 2)
    expect(["validate-config", str(tmp / "missing.yaml")], 2)

    out = tmp / "run"
    text = expect(["run", "-c", str(configs / "aerial_sensor_sidelink.yaml"), "-r", "2", "-d", "5",
                   "-s", "7", "-o", str(out), "--packet-logs"], 0)
    if "metric,mean,ci95_half_width,runs" not in text:
        failures.append("run did not print the aggregate table")
    for name in ["aggregate.csv", "runs.csv", "packets_run0.csv", "power_run1.csv"]:
        if not (out / name).exists():
            failures.append(f"missing {name}")

    heat = tmp / "heat"
    expect(["heatmap", "-c", str(configs / "prediction.yaml"), "-a", "40", "--cell-size", "50",
            "-o", str(heat)], 0)
    if not (heat / "heatmap_alt40.csv").exists():
        failures.append("missing heatmap_alt40.csv")

    # A map too small for the requested cars fails at runtime.
    crowded = tmp / "crowded.yaml"
    crowded.write_text("scenario: aerial_bs\nduration: 5\nruns: 1\n"
                       "world: {synthetic: {width: 200, depth: 200}}\nvehicles: {cars: 300}\n")
    expect(["run", "-c", str(crowded), "-o", str(tmp / "crowded")], 3)
    if not (tmp / "crowded" / "aggregate.csv").read_text().startswith("# partial"):
        failures.append("failed batch did not write a partial aggregate")

if failures:
    print("\n".join(failures))
    sys.exit(1)
print("cli ok")
