"""Smoke test for the qcombo Python extension.

Build first with `cargo build --release -p qcombo-py`; the script loads
target/release/libqcombo.so when the module is not installed.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    try:
        import qcombo

        return qcombo
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libqcombo.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("qcombo", str(lib))
            spec = importlib.util.spec_from_loader("qcombo", loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("qcombo extension not found; run `cargo build --release -p qcombo-py`")


def main():
    qc = load_module()

    w = qc.grid_weights(2, 2)
    assert abs(sum(w) - 1.0) < 1e-9 and max(w) - min(w) < 1e-9
    ring = qc.pagerank([[1, 2], [0, 2], [0, 1]])
    assert all(abs(k - 1 / 3) < 1e-9 for k in ring)

    config = qc.Config.load(ROOT / "configs" / "1x2.toml")
    assert (config.rows, config.cols, config.algorithm) == (1, 2, "qcombo")
    assert qc.Config.from_toml(config.to_toml()).to_toml() == config.to_toml()

    env = qc.Env(config)
    learner = qc.Learner(config)
    obs = env.observation()
    assert len(obs) == env.agents == 2 and len(obs[0]) == qc.OBS_DIM
    last = [0] * env.agents
    total = 0.0
    for _ in range(60):
        actions = learner.act(obs, last, 0.1)
        rewards, global_reward, obs = env.step(actions)
        assert len(rewards) == 2 and math.isfinite(global_reward)
        total += global_reward
        last = actions
    assert env.time_step == 300
    assert len(learner.q_values(obs, last)) == 2

    config.set_schedule(700, 100, 100, 100, 50)
    config.seed = 3
    records, losses, trained = qc.run_training(config)
    assert len(records) == 3 * 10 and losses > 0
    static = qc.run_reference(config, "static")
    print(f"training final {qc.mean_global_reward(records[-10:]):.2f}, static {qc.mean_global_reward(static[-10:]):.2f}")

    with tempfile.TemporaryDirectory() as tmp:
        path = pathlib.Path(tmp) / "ck.qckp"
        trained.save(path, 3)
        again = qc.Learner.load(path, config)
        assert again.q_values(obs, last) == trained.q_values(obs, last)

    try:
        config.algorithm = "dqn"
    except ValueError:
        pass
    else:
        raise AssertionError("unknown algorithm accepted")

    print(f"smoke test passed (random-ish rollout reward {total / 60:.2f})")


if __name__ == "__main__":
    main()
