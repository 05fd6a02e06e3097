"""Smoke test for the prmrl extension module.

Build and install first:  pip install --no-build-isolation ./crates/python
Then run:                 python3 python/smoke_test.py
"""

import math
import os
import tempfile

import prmrl


def main():
    grid = prmrl.Grid.maze(seed=3, width=10.0, height=10.0, corridor=2.5)
    assert grid.extent == (10.0, 10.0)
    assert 0.0 < grid.free_area < 100.0

    env = prmrl.Environment(grid, task="indoor")
    params = env.edge_params(radius=4.0)
    assert params.max_steps == math.ceil(4 * 4.0 / (1.0 * env.dt))

    policy = prmrl.Policy.reference(env)
    policy = policy.train(env, seed=1, population=6, iterations=1, episodes=8)
    assert policy.fitness is not None

    assert abs(prmrl.success_lower_bound(0.85, 6.05) - 0.37) < 0.005

    sl = prmrl.Roadmap.build(env, 0.3, params, seed=7)
    rl = prmrl.Roadmap.build(env, 0.3, params, policy=policy, seed=7)
    assert sl.nodes == rl.nodes, "node set must not depend on the planner"
    for _, _, rate, length, _ in rl.edges:
        assert rate > params.p_success and length > 0.0

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "roadmap.txt")
        rl.save(path)
        again = prmrl.Roadmap.load(path)
        assert again.edges == rl.edges and len(again) == len(rl)

    start = rl.nodes[0]
    plan = None
    for goal in reversed(rl.nodes[1:]):
        plan = rl.query(env, start, goal, policy=policy, seed=1)
        if plan is not None:
            break
    assert plan is not None, "node 0 should connect to some other node"
    assert plan.expected_success >= plan.success_lower_bound
    traj = plan.execute(env, policy, seed=1)
    print(
        f"plan with {plan.n_w} edges, expected success {plan.expected_success:.3f}, "
        f"executed: {traj.termination} after {len(traj)} steps"
    )
    assert len(traj.positions) == len(traj) + 1

    try:
        prmrl.Roadmap.load("/nonexistent/roadmap.txt")
    except OSError:
        pass
    else:
        raise AssertionError("missing file should raise")

    print(f"sl edges {len(sl.edges)}, rl edges {len(rl.edges)}, nodes {len(rl)}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
