"""Smoke test for the `edrp` Python extension.

Build and install first, e.g. `pip install ./crates/py`, then run
`python python/smoke_test.py` from the repository root.
"""
import os
import tempfile

import edrp

HERE = os.path.dirname(os.path.abspath(__file__))
NET15 = os.path.join(HERE, "..", "configs", "net15.toml")


def main():
    lo, hi = edrp.select_window(0.5, literal=True)
    assert (lo, hi) == (269.0, 300.0), (lo, hi)
    assert edrp.collision_prob_uniform(10.0, 30.0, 20.0) == 0.5
    assert abs(edrp.pearson([1.0, 2.0, 3.0], [2.0, 1.0, 3.0]) - 0.5) < 1e-12

    best, table = edrp.optimal_block_size(0.99)
    assert best == 64 and [r for (b, _, r) in table if b == best] == [0.0]
    assert edrp.optimal_block_size(0.35)[0] == 16

    payload = bytes(range(256)) * 4
    rt = edrp.codec_roundtrip(payload, block_size=16, loss=0.3, seed=3)
    assert rt["complete"] and rt["exact"], rt

    net = edrp.Network.load(NET15)
    assert len(net) == 15
    drp = edrp.run_protocol(net, "drp", seed=5)
    lq = edrp.run_protocol(net, "drp-lqcsma", seed=5)
    assert drp["complete"] and lq["complete"]
    print("drp goodput %.1f bit/s, drp-lqcsma %.1f bit/s" % (drp["goodput_bps"], lq["goodput_bps"]))

    with tempfile.TemporaryDirectory() as out:
        rows = edrp.run_campaign(network=NET15, protocol="drp", rounds=3, seed=9, out_dir=out)
        assert len(rows) == 3
        assert os.path.getsize(os.path.join(out, "summary.csv")) > 0

    print("edrp smoke test passed; protocols:", ", ".join(edrp.PROTOCOLS))


if __name__ == "__main__":
    main()
