"""Smoke test for the `prosocial` extension module.

Build and install first, e.g. `pip install --no-build-isolation ./crates/python`,
then run `python python/smoke_test.py`.
"""

import json
import math

import prosocial


def close(a, b, tol=1e-12):
    return all(math.isclose(x, y, abs_tol=tol) for x, y in zip(a, b))


def main():
    model = prosocial.Model.fixture("fixture_a")
    assert model.n_states == 2
    assert model.validate() == []
    assert prosocial.Model.from_json(model.to_json()).fingerprint() == model.fingerprint()

    # One R-mode round with a signal and a helping human.
    b = model.belief_update([0.5, 0.5], "R", "signal", "help")
    assert close(b, [0.16, 0.84]), b

    reward = prosocial.Reward(n_states=2)
    policy = prosocial.plan(model, reward, "HRHRHRHRH")
    assert policy.action([0.5, 0.5], "R") in ("signal", "no-signal")
    assert prosocial.Policy.from_json(policy.to_json(), model).n_stages == 9

    session = prosocial.Session(model, "always", reward)
    action, round_, belief = session.act("R")
    assert (action, round_, belief) == ("signal", 0, None)
    assert close(session.observe("help"), [0.16, 0.84])
    session.act("H")
    assert session.replay() == session.belief
    assert len(json.loads(session.trace_json())["events"]) == 2

    try:
        session.act("H", "help")
    except prosocial.ProsocialError:
        pass
    else:
        raise AssertionError("illegal observation accepted")

    data = prosocial.sample_jsonl(prosocial.Model.fixture("planted_two_state"), 80, seed=3)
    learned, report = prosocial.fit(data, [2, 3], restarts=3, max_iters=50)
    assert learned.n_states in (2, 3)
    assert len(json.loads(report)["candidates"]) == 2

    ladder = prosocial.Model.fixture("four_state_ladder")
    cells = json.loads(prosocial.sweep(ladder))["cells"]
    assert len(cells) == 20

    sim = json.loads(
        prosocial.simulate(ladder, prosocial.Reward(), ["never", "always"], episodes=500, seed=1)
    )
    assert [p["policy"] for p in sim["policies"]] == ["never", "always"]

    print("smoke test passed")


if __name__ == "__main__":
    main()
