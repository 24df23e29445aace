"""Smoke test for the Python bindings.

Build the extension first, e.g.

    cargo build -p thompson-holo-py --release
    cp target/release/libthompson_holo.so python/thompson_holo.so

then run ``python3 python/smoke_test.py``.
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import thompson_holo as th


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    a, b, c = th.Element("A"), th.Element("B"), th.Element("C")
    assert str(a) == "(.(..))|((..).)@0", str(a)
    assert a.eval("1/2") == "1/2^2"
    assert (a * a.inverse()).is_identity()
    assert (c * c * c).is_identity()
    assert a.is_in_f() and not c.is_in_f()
    assert close(b(0.875), 0.75)

    for word, want in [("A", 1.0), ("B", 0.5), ("C", 1.0)]:
        for route in ("action", "diagram"):
            re, im = th.vacuum_matrix_element(word, route=route)
            assert close(re, want) and close(im, 0.0), (word, route, re, im)

    rotation_invariant, constants = th.verify_tensor("four-colour")
    assert rotation_invariant and constants == [(1, 2.0)], constants
    try:
        th.verify_tensor("nonesuch")
    except ValueError as e:
        assert "UnknownTensor" in str(e)
    else:
        raise AssertionError("unknown tensor accepted")

    words = th.reduced_words(2)
    assert len(words) == 37
    gram = th.gram_matrix(words[:7])
    assert all(close(gram[i][i][0], 1.0) for i in range(7))

    tau = th.Tessellation.standard(1)
    assert len(tau.vertices()) == 8
    assert tau.doe == ("0", "1/2^1")
    turned = tau
    for _ in range(4):
        turned = turned.flip_doe()
    assert turned.same_as(tau)
    image = tau.apply(a)
    assert image.doe == ("0", "1/2^2"), image.doe
    assert len(th.flips_realizing("A")) >= 1
    assert tau.svg().startswith("<svg")

    element, err, _ = th.approximate("identity", 5)
    assert err == 0.0 and element == ".|.@0"
    _, err, _ = th.approximate("mobius:0,0.5", 6)
    assert 0.0 < err < 0.1

    sa, sb, bonds = th.btz_entropy(1)
    assert sa > 0 and close(sa, sb, 1e-10) and sa <= bonds * math.log(3) + 1e-12

    print("python smoke test passed")


if __name__ == "__main__":
    main()
