"""Deterministic generators for the pinned golden files under tests/data.

Run ``python3 tests/golden.py`` to rewrite them; the tests regenerate the same
values in memory and demand bit equality with what is on disk.
"""
from pathlib import Path

import numpy as np

from infoclip.losses import compression_loss, finite_diff_oracle

DATA = Path(__file__).parent / "data"
LC_GRAD = DATA / "lc_grad_n6_d3.ictf"
LC_SEED = 6003
RUN_METRICS = DATA / "golden_run_metrics.jsonl"
RUN_SUMMARY = DATA / "golden_run_summary.json"
RUN_CONFIG = dict(seed=3, steps=12, noise_sigma=0.2, unseen_fraction=0.3, batch_pairs=32, eval_scenes=2)


def lc_inputs():
    rng = np.random.default_rng(LC_SEED)
    return tuple(rng.normal(size=(6, 3)) for _ in range(3))


def lc_fd_gradient():
    """Central-difference gradient of L_c w.r.t. each input, stacked (3, 6, 3) -> (18, 3)."""
    dv, dl, r = lc_inputs()
    parts = [
        finite_diff_oracle(lambda x: compression_loss(x, dl, r), dv),
        finite_diff_oracle(lambda x: compression_loss(dv, x, r), dl),
        finite_diff_oracle(lambda x: compression_loss(dv, dl, x), r),
    ]
    return np.vstack(parts)


def golden_run(out_dir: Path):
    """Train the pinned configuration and emit its metrics into ``out_dir``."""
    from infoclip.bench import TrainConfig, train_distill
    from infoclip.metrics import emit_metrics, summary_dict, write_json

    report = train_distill(TrainConfig(**RUN_CONFIG))
    emit_metrics(report, out_dir / "metrics.jsonl")
    write_json(summary_dict(report), out_dir / "summary.json")
    return report


if __name__ == "__main__":
    import shutil
    import tempfile

    from infoclip.tensorfile import write_tensor

    DATA.mkdir(exist_ok=True)
    write_tensor(LC_GRAD, lc_fd_gradient())
    with tempfile.TemporaryDirectory() as tmp:
        golden_run(Path(tmp))
        shutil.copy(Path(tmp) / "metrics.jsonl", RUN_METRICS)
        shutil.copy(Path(tmp) / "summary.json", RUN_SUMMARY)
    print(f"wrote {LC_GRAD}, {RUN_METRICS}, {RUN_SUMMARY}")
