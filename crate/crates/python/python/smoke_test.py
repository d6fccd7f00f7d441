"""Smoke test for the xai_harmony extension module."""

import math

import xai_harmony as xh


def main():
    iris = xh.Dataset.named("iris")
    assert len(iris) == 150
    assert len(iris.feature_names) == 4

    train, test = iris.split(0.2, seed=0)
    model = xh.Model.train("logit", train, seed=0)
    labels = model.predict(test.x)
    acc = sum(int(a == b) for a, b in zip(labels, test.y)) / len(test)
    assert acc > 0.8, acc

    attr = xh.shapley("logit", train, test, seed=0)
    assert attr.backend == "retrain", attr.backend
    for row, base, pred in zip(attr.values, attr.baseline, attr.prediction):
        assert abs(sum(row) + base - pred) < 1e-9
    static = attr.rfi()

    sw = xh.sweep(model, test, metric="accuracy", seed=0)
    assert len(sw.grid) == 19
    dynamic = sw.rfi()
    assert math.isclose(sum(static), 1.0) and math.isclose(sum(dynamic), 1.0)

    cos = xh.cosine(static, dynamic)
    assert 0.0 <= cos <= 1.0
    names = iris.feature_names
    curve = xh.jaccard_curve(static, dynamic, names)
    assert len(curve) == 4 and curve[-1] == 1.0
    assert xh.jaccard(["a", "b"], ["b", "c"]) == 1 / 3
    assert xh.top_k([0.1, 0.5, 0.4], ["x", "y", "z"], 2) == ["y", "z"]
    assert math.isclose(xh.anwa([0.5, 1.0, 1.5], [0.6, 0.9, 0.8]), (0.3 + 0.9 + 0.4) / 2.0)

    try:
        xh.Model.train("svm", train)
    except xh.HarmonyError:
        pass
    else:
        raise AssertionError("unknown model accepted")

    files = xh.run('seed = 0\ndatasets = ["iris"]\nmodels = ["logit"]\n')
    assert "manifest.json" in files and "cells.csv" in files

    print(f"smoke test ok: accuracy {acc:.3f}, cosine {cos:.3f}, jaccard {curve}")


if __name__ == "__main__":
    main()
