"""Drive the ``sanp`` command from Python: synthesise, train, fill, score.

Everything lands in a temporary directory. The same steps work from a shell
by replacing ``main([...])`` with ``sanp ...``.
"""

import csv
import os
import tempfile

from sanp.cli import main

work = tempfile.mkdtemp(prefix="sanp-demo-")
data = os.path.join(work, "data")
ckpt = os.path.join(work, "model.ckpt")


def run(*argv):
    print("$ sanp", " ".join(argv))
    code = main(list(argv))
    assert code == 0, f"exit code {code}"


run("synth", "--size", "64", "--seed", "5", "--void-spec", "rect:0.04", "--out", data)
run("train", "--dem", f"{data}/voided.asc", "--out", ckpt, "--dim", "32", "--hidden", "64", "--k", "30",
    "--batch", "16", "--iters", "150", "--eval-every", "50", "--lr", "1e-3")

# The manifest is enough to rebuild the checkpoint exactly.
again = os.path.join(work, "again.ckpt")
run("train", "--manifest", ckpt + ".manifest", "--out", again)
with open(ckpt, "rb") as a, open(again, "rb") as b:
    print("rebuilt checkpoint identical:", a.read() == b.read())

run("reconstruct", "--dem", f"{data}/voided.asc", "--checkpoint", ckpt, "--out-mean", f"{work}/filled.asc",
    "--out-std", f"{work}/sigma.asc", "--png", f"{work}/render")

for label, source in (("network", ["--checkpoint", ckpt]), ("linear", ["--method", "linear"]),
                      ("nearest", ["--method", "nearest"])):
    out = os.path.join(work, label + ".csv")
    run("evaluate", "--dem", f"{data}/truth.asc", "--voided", f"{data}/voided.asc", *source, "--out", out)
    with open(out) as fh:
        row = next(csv.DictReader(fh))
    print(f"   MAE {float(row['mae']):.3f} m  RMSE {float(row['rmse']):.3f} m  over {row['n_points']} pixels")

print("outputs are in", work)
