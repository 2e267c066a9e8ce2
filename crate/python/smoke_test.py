"""Smoke test for the pyhyperneo extension.

Build and install first:
    pip install --no-build-isolation ./crates/py
"""

import json
import math
import pathlib
import tempfile

import pyhyperneo as h

DATA = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "data"


def main():
    hg = h.Hypergraph.load(str(DATA / "workplace_edges.txt"), "aggregated")
    x = h.AttributeMatrix.load(str(DATA / "workplace_attrs.txt"), hg)
    print(hg, "categories:", x.categories)
    assert hg.num_nodes == 92 and x.num_categories == 5
    assert abs(hg.sparsity_constant() - 2 * (1 - 1 / hg.max_size)) < 1e-12

    res = h.fit(hg, x, k=5, gamma=0.9, n_restarts=2, seed=1)
    trace = res.loglik_trace
    print(f"fit: loglik {res.best_loglik:.3f} after {len(trace) - 1} cycles")
    assert math.isfinite(res.best_loglik)
    w = res.params.w
    assert all(w[a][b] == w[b][a] for a in range(5) for b in range(5))
    assert all(abs(sum(row) - 1) < 1e-12 for row in res.params.beta)

    folds, mean = h.cross_validate(hg, x, k=5, gamma=0.9, n_restarts=2, seed=0)
    print(f"cv: mean AUC {mean:.3f} over {len(folds)} folds")
    assert len(folds) == 5 and 0.0 <= mean <= 1.0

    inst = h.generate_instance(n=200, p_u=1.0, max_size=5, edges_per_node=5, seed=3)
    fitted = h.fit(inst.hypergraph, inst.attributes, k=2, gamma=0.7, n_restarts=3, seed=3)
    cos = h.cosine_similarity(inst.u, fitted.params.u)
    print(f"planted: cosine {cos:.4f}")
    assert cos > 0.9

    assert h.auc_from_scores([(0.9, 0.1), (0.4, 0.4)]) == 0.75
    assert h.cosine_similarity([[1.0, 2.0]], [[4.0, 2.0]]) == 1.0

    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        res.params.write(str(tmp / "fit"), hg, x.categories)
        back, cats = h.Params.read(str(tmp / "fit"), hg)
        assert back.u == res.params.u and cats == x.categories

        for kind in ["learned", "raw", "size-weighted", "attributes"]:
            out = tmp / kind
            manifest = h.export_bundle(hg, kind, str(out), x=x, params=res.params)
            on_disk = json.loads((out / "manifest.json").read_text())
            assert on_disk["num_nodes"] == manifest["num_nodes"] == 92
            print(f"bundle {kind}: avg degree {manifest['avg_degree']:.2f}")
        m = h.PairMatrix.read(str(tmp / "learned" / "matrix.tsv"), 92, "learned")
        ref = h.learned_representation(hg, res.params)
        assert m.entries() == ref.entries()

        inst.write(str(tmp / "planted"))
        again = h.PlantedInstance.load(str(tmp / "planted"))
        assert again.u == inst.u

    print("smoke test passed")


if __name__ == "__main__":
    main()
