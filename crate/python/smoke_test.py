"""Smoke test for the iet_py extension.

Build and install first:  pip install --no-build-isolation crates/py
"""

import json
import sys

import iet_py


def check(name, cond):
    print(f"{'ok  ' if cond else 'FAIL'} {name}")
    return cond


def main():
    ok = True
    perm = iet_py.Permutation("1234/4321")
    ok &= check("d", perm.d == 4)
    ok &= check("irreducible", perm.is_irreducible())
    ok &= check("genus 2", perm.genus() == 2)
    ok &= check("class size 7", perm.class_size() == 7)
    ok &= check("reversal matches", iet_py.Permutation.reversal(4) == perm)

    t = iet_py.Iet.random(perm, seed=7, precision_bits=256)
    ok &= check("lengths sum to 1", abs(sum(t.lengths) - 1.0) < 1e-12)
    x = 0.3141
    y = t(x)
    ok &= check("image in [0,1)", 0.0 <= y < 1.0)

    nxt, kind, steps, m = t.zorich_step()
    ok &= check("zorich kind", kind in ("top", "bottom"))
    ok &= check("zorich steps >= 1", steps >= 1)
    ok &= check("zorich matrix square", len(m) == 4 and all(len(r) == 4 for r in m))
    lam_back = [sum(nxt.lengths[i] * m[i][j] for i in range(4)) for j in range(4)]
    scale = sum(lam_back)
    ok &= check(
        "lambda' B proportional to lambda",
        all(abs(a / scale - b) < 1e-9 for a, b in zip(lam_back, t.lengths)),
    )

    dump = t.orbit_dump(5)
    ok &= check("orbit dump lines", len(dump) == 5 and all(json.loads(l) for l in dump))

    f = [1.0, -1.0, 0.5, 0.0]
    s = t.birkhoff_sum(f, x, 100)
    s0 = t.twisted_birkhoff_sum(f, [0.0] * 4, x, 100)
    ok &= check("zero twist equals plain sum", abs(s - s0) < 1e-9)
    ok &= check("discrepancy finite", t.discrepancy(0.1, 0.4, 256) >= 0.0)

    u = iet_py.Iet.for_suspension(perm, 3)
    ok &= check("sweep lengths inside slab", u.in_slab(3))
    rep = json.loads(u.suspension(3, [1, 1, 1, 1]))
    ok &= check("suspension checks", rep["failures"] == [])

    exps = iet_py.top_exponents(perm, k=2, segments=8, orbit_length=100, seed=1, precision_bits=512)
    ok &= check("top exponent positive", exps[0][0] > 0.0)
    ok &= check("exponents ordered", exps[0][0] > exps[1][0])

    tw, se = iet_py.twisted_exponent(perm, "lebesgue", segments=8, orbit_length=100, precision_bits=512)
    ok &= check("twisted exponent below top", tw < exps[0][0])

    rec = json.loads(
        iet_py.run_experiment(
            "kz-ratio",
            json.dumps({"estimator_bits": 512, "sizes": {"segments": 8, "orbit_length": 100}}),
        )
    )
    ok &= check("run_experiment returns checks", len(rec["checks"]) > 0)

    try:
        iet_py.Permutation("1 2 / 1 2 3")
        ok &= check("bad permutation raises", False)
    except ValueError:
        ok &= check("bad permutation raises", True)

    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
