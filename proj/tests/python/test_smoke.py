"""Python smoke tests for the ptsim bindings.

Run directly: python3 test_smoke.py <dir containing the ptsim package>
"""

import sys

if len(sys.argv) > 1:
    sys.path.insert(0, sys.argv[1])

import ptsim  # noqa: E402


def test_split_vaddr():
    indices, offset = ptsim.split_vaddr(0x200000)
    assert list(indices) == [0, 0, 1, 0]
    assert offset == 0
    indices, offset = ptsim.split_vaddr(0xFFFFFFFFF123)
    assert list(indices) == [511, 511, 511, 511]
    assert offset == 0x123


def test_prefetch_window():
    # Whole-page window at degree 9, VMA clamp at slots [100, 300).
    table = (0, 0x200000)
    assert ptsim.prefetch_window(100, 9, *table, *table) == (0, 512)
    vma = (100 * 0x1000, 200 * 0x1000)
    assert ptsim.prefetch_window(150, 9, *table, *vma) == (100, 300)
    assert ptsim.prefetch_window(7, 0, *table, *table) == (7, 8)


def test_partitioned_run():
    result = ptsim.run(
        policy="lazy",
        nodes=4,
        cores=2,
        scenario="partitioned",
        params={"pages_per_node": 200},
        audit="full",
    )
    assert result["exit_code"] == 0
    counters = result["counters"]
    assert counters["root_replicas"] == 4
    assert counters["ring_hist_1"] == counters["pt_pages_total"] - 4


def test_footprint_ratio():
    runs = {
        policy: ptsim.run(
            policy=policy,
            nodes=4,
            cores=2,
            scenario="partitioned",
            params={"pages_per_node": 300},
        )["counters"]["pt_pages_total"]
        for policy in ("none", "eager", "lazy")
    }
    assert runs["eager"] == 4 * runs["none"]
    assert runs["none"] <= runs["lazy"] <= runs["eager"]


def test_compare_and_determinism():
    kwargs = dict(
        nodes=8,
        cores=2,
        scenario="mprotect_loop",
        params={"iters": 30},
        seed=5,
    )
    first = ptsim.compare(policies=["none", "eager", "lazy+opt"], **kwargs)
    second = ptsim.compare(policies=["none", "eager", "lazy+opt"], **kwargs)
    assert first["exit_code"] == 0
    assert first["csv"] == second["csv"]
    header, none_row, eager_row, lazy_row = first["csv"].strip().split("\n")
    cols = header.split(",")
    norm_cost = cols.index("norm_cost_total")
    assert none_row.split(",")[norm_cost] == "1"
    assert lazy_row.split(",")[norm_cost] == "1"
    assert float(eager_row.split(",")[norm_cost]) > 1.0


def test_trace_round_trip():
    text = ptsim.gen_trace(
        "webserver_churn", nodes=4, cores=4, params={"requests": 20}, seed=3
    )
    count = ptsim.validate_trace(text)
    assert count == len(text.strip().split("\n"))
    try:
        ptsim.validate_trace('{"seq":1,"proc":0,"thread":0,"op":"warp"}\n')
    except ValueError:
        pass
    else:
        raise AssertionError("bad op was accepted")


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"ok {test.__name__}")
    print(f"{len(tests)} python smoke tests passed")


if __name__ == "__main__":
    main()
