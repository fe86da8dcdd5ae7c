"""Smoke test for the `posa` extension module.

Build and install first:
    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml
"""

import math

import posa


def main():
    env = posa.BlockQuadraticEnv([2, 2], seed=3)
    assert env.action_dim == 4 and env.state_dim == 1
    state = env.reset()
    next_state, reward, done = env.step([0.1, -0.2, 0.0, 0.3])
    assert done and len(next_state) == 1 and math.isfinite(reward)
    value, g_mean, g_log_std = env.analytic_objective([0.0] * 4, [1.0] * 4)
    assert value < 0 and len(g_mean) == 4 and len(g_log_std) == 4

    truth = env.true_partition()
    affinity = posa.AffinityState(4)
    hess = [[abs(x) for x in row] for row in env.matrix()]
    affinity.update(hess)
    found = affinity.cluster(2)
    assert posa.adjusted_rand_index(found, truth) == 1.0, (found, truth)

    adv, ret = posa.compute_gae([1.0, 1.0], [False, True], [0.0, 0.0], gamma=0.5, lam=1.0)
    assert adv == [1.5, 1.0] and ret == [1.5, 1.0], (adv, ret)

    trainer = posa.Trainer(
        """
        n_iterations = 3
        batch_size = 128
        policy_epochs = 2
        fit_steps = 5
        policy_hidden = [16]
        value_hidden = [16]
        env = { kind = "block_quadratic", block_dims = [2, 2] }
        advnet = { wide_hidden = [16], deep_hidden = [16] }
        """
    )
    for _ in range(3):
        record = trainer.step()
        assert math.isfinite(record["mean_return"])
    assert trainer.iteration == 3
    assert len(trainer.policy_std()) == 4

    try:
        posa.Trainer("batch_sise = 3")
    except ValueError as e:
        assert "batch_sise" in str(e)
    else:
        raise AssertionError("bad config accepted")

    print("posa smoke test ok:", found, "recovered", truth, "return", round(record["mean_return"], 3))


if __name__ == "__main__":
    main()
