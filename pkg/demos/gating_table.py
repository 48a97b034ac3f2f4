"""A miniature version of the gating comparison tables.

Trains the GRN-Transformer once per gating variant and seed on a small
synthetic set and prints the per-variant medians next to the plain
Transformer.  Numbers at this scale are noisy; the point is the layout and
the workflow, not the ranking.
"""
import sys
from pathlib import Path

from grnppg import datagen as dg
from grnppg import experiment as ex

GATINGS = ["glu", "swiglu", "geglu", "reglu", "gnlu", "swignlu"]


def main(out: Path) -> None:
    ds = dg.build_dataset(n_non_artifact=300, n_artifact=64, seed=1)
    ex.save_dataset(out / "dataset.grn", ds)
    cfg = ex.ExperimentConfig(model=ex.toy_model_config(epochs=8), seeds=[0, 1, 2], workers=3)
    ex.cmd_sweep(cfg, out / "dataset.grn", ["vanilla", "grn_intermediate"], GATINGS, out)

    rows = [r for r in ex.read_sweep(out / "sweep.csv") if r["seed"] == "median"]
    print(f"{'Models':<14}{'Acc':>8}{'Pre':>8}{'Rec':>8}{'F1':>8}")
    for r in rows:
        print(f"{r['Models']:<14}" + "".join(f"{float(r[k]):8.3f}" for k in ("Acc", "Pre", "Rec", "F1")))


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "demo_sweep"))
