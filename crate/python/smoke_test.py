"""Smoke test for the eras_py extension.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import math
import tempfile

import eras_py


def main():
    kg = eras_py.KnowledgeGraph.synthetic(
        80,
        [("symmetric", 2, 80), ("anti-symmetric", 2, 80)],
        seed=1,
    )
    print(kg)
    assert kg.num_relations == 4
    assert kg.patterns()[:2] == ["symmetric", "symmetric"]

    distmult = eras_py.Architecture.known("DistMult", blocks=2)
    assert str(distmult) == "1 2 : 1 0 0 3"
    assert eras_py.Architecture("1 2 : 1 0 0 3") == distmult
    assert not eras_py.Architecture("1 2 : 1 0 0 0").is_exploitative()
    try:
        eras_py.Architecture("1 2 : 9 0 0 0")
    except ValueError:
        pass
    else:
        raise AssertionError("bad token accepted")

    model = eras_py.train(kg, eras_py.Architecture.known("ComplEx", 2), dim=8, epochs=6, eval_every=2)
    report = model.evaluate(kg, "test")
    print("ComplEx test MRR", round(report["mrr"], 4))
    assert 0.0 < report["mrr"] <= 1.0
    assert len(report["per_relation"]) == 4
    assert all(math.isfinite(x) for x in model.losses)
    h, r, t = kg.triples("train")[0]
    assert math.isfinite(model.score(h, r, t))

    searched = eras_py.search_and_train(
        kg, dim=8, blocks=2, groups=2, search_epochs=2, pretrain_epochs=2,
        epochs=4, eval_every=2, derive_samples=3, reward_candidates=40,
    )
    print("searched", searched.architecture, searched.assignment)
    assert searched.architecture.groups == 2

    with tempfile.TemporaryDirectory() as d:
        kg.write(d)
        again = eras_py.KnowledgeGraph.load(d)
        assert again.num_entities == kg.num_entities
    print("ok")


if __name__ == "__main__":
    main()
