"""Smoke test for the pytransda extension module.

Build and install first:

    pip install --no-build-isolation ./crates/python
"""

import math
import os
import tempfile

import pytransda as td


def main():
    sp, sl, tp, tl = td.synth_blobs(per_class=60, seed=7)
    assert len(sp) == 180 and len(tp) == 180 and len(sl) == 180 and len(tl) == 180

    cfg = td.TrainConfig(max_iters=200, learning_rate=0.01, batch_size=64, seed=7)
    ckpt, report = td.train(sp, sl, tp, cfg, target_labels=tl)
    assert ckpt.iteration == len(report["loss"])
    assert all(e <= n for e, n in zip(report["energy"], report["nn_energy"]))
    acc = report["final_accuracy"]
    assert 0.0 <= acc <= 1.0
    print(f"trained {ckpt.iteration} iterations, accuracy {acc:.4f}")

    # same inputs, same bytes
    again, _ = td.train(sp, sl, tp, cfg, target_labels=tl)
    assert again.to_bytes() == ckpt.to_bytes()

    labels, energy = td.label(ckpt, sp, sl, tp)
    assert len(labels) == len(tp) and math.isfinite(energy)
    assert abs(td.evaluate(ckpt, sp, sl, tp, tl) - acc) < 1e-12

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.ckpt")
        ckpt.save(path)
        loaded = td.Checkpoint.load(path)
        assert loaded == ckpt
        with open(path, "rb") as f:
            assert f.read() == ckpt.to_bytes()
        bad = bytearray(ckpt.to_bytes())
        bad[0] ^= 0xFF
        try:
            td.Checkpoint.from_bytes(bytes(bad))
        except ValueError:
            pass
        else:
            raise AssertionError("corrupted checkpoint accepted")

    meta = ckpt.metadata()
    assert meta["arch"] == "linear" and meta["d_in"] == 2 and meta["seed"] == 7
    w = ckpt.metric
    assert len(w) == meta["d_out"]

    assert td.similarity([[1.0, 0.0], [0.0, 1.0]], [1.0, 2.0], [3.0, 4.0]) == 11.0
    assert td.similarity([[0.0, 1.0], [0.0, 0.0]], [1.0, 0.0], [0.0, 1.0]) == 1.0
    assert td.cosine([1.0, 0.0], [0.0, 0.0]) == 0.0

    edges = td.knn_graph([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0]], 1)
    assert all(a < b for a, b, _ in edges)

    labels, energy = td.alpha_beta_swap(
        [[-1.0, 0.0], [-1.0, 0.0], [0.0, -0.2], [-1.0, 0.0]],
        [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)],
        [0, 0, 1, 0],
    )
    assert labels == [0, 0, 0, 0] and abs(energy + 3.0) < 1e-12

    try:
        td.TrainConfig(knn_k=0)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
