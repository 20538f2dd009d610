"""Smoke test for the `bfs3` extension module.

Build and run without maturin:

    cargo build --release -p bfs3-python --features extension-module
    cp target/release/libbfs3.so /tmp/bfs3.so      # .dylib on macOS
    PYTHONPATH=/tmp python3 crates/python/python/smoke_test.py
"""

import csv
import io

import bfs3


def chain():
    # 0 -> 1 -> 2 (terminal); action 1 stays put.
    rows = [[(1, 1.0)], [(0, 1.0)], [(2, 1.0)], [(1, 1.0)], [(2, 1.0)], [(2, 1.0)]]
    rewards = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]
    return bfs3.TabularMdp(3, 2, rows, rewards, 0.9, terminal=[2])


def main():
    mdp = chain()
    assert (mdp.num_states, mdp.num_actions, mdp.gamma) == (3, 2, 0.9)
    assert bfs3.TabularMdp.from_text(mdp.to_text()).to_text() == mdp.to_text()

    values = bfs3.value_iteration(mdp)
    assert abs(values[1] - 1.0) < 1e-9 and abs(values[0] - 0.9) < 1e-9, values
    assert bfs3.optimal_policy(mdp)[:2] == [0, 0]

    value, queries, dump = bfs3.fsss_estimate(mdp, 0, d=3, t=50, c=1, seed=1)
    assert abs(value - 0.9) < 1e-9 and 0 < queries <= 50 * 3 * 2 and dump

    stats = bfs3.SuffStats(3, 2, 2)
    s2 = stats.update(0, 0, 1, 0.0).update(0, 0, 1, 0.0)
    assert s2.count(0, 0, 1) == 2 and s2.discoveries == 2
    assert s2.update(0, 0, 1, 0.0) == s2
    assert bfs3.SuffStats.from_text(s2.to_text()) == s2

    agent = bfs3.Bfs3Agent(mdp, d=3, t=10, c=2, cap=3, seed=4)
    state, steps = 0, 0
    while state != 2 and steps < 50:
        action = agent.act(state)
        queries, hit = agent.last_decision()
        assert hit or queries > 0
        nxt, reward = mdp.sample(state, action, seed=steps)
        agent.observe(state, action, nxt, reward)
        state, steps = nxt, steps + 1

    text = bfs3.run_experiment("grid5", "bfs3", d=3, t=5, c=2, n=3, runs=2, steps=20, seed=7)
    assert text.splitlines()[0] == bfs3.CSV_HEADER
    rows = list(csv.DictReader(io.StringIO(text)))
    assert {r["run"] for r in rows} == {"0", "1"}
    again = bfs3.run_experiment("grid5", "bfs3", d=3, t=5, c=2, n=3, runs=2, steps=20, seed=7)
    strip = lambda t: [line.rsplit(",", 1)[0] for line in t.splitlines()]
    assert strip(text) == strip(again)

    try:
        bfs3.run_experiment("grid5", "sarsa")
    except ValueError as e:
        assert "rmax" in str(e)
    else:
        raise AssertionError("unknown agent accepted")

    print(f"bfs3 {bfs3.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
