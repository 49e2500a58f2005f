import math

import numpy as np
import pytest

from vlcsee.nn import (MLP, AdamState, AgentState, GaussianPolicy, StaleCacheError, ValueNet, adam_step,
                       dumps_checkpoint, gaussian_logprob, loads_checkpoint)
from vlcsee.ppo import actor_loss_and_grads, critic_loss_and_grads


def fd_check(params, loss_fn, analytic, h=1e-5, rtol=1e-4, atol=1e-9):
    """Compare every analytic gradient entry with a central difference."""
    for p, g in zip(params, analytic):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + h
            up = loss_fn()
            p[i] = old - h
            down = loss_fn()
            p[i] = old
            num = (up - down) / (2 * h)
            assert g[i] == pytest.approx(num, rel=rtol, abs=atol), f"index {i}"


def test_forward_examples():
    net = MLP((3, 4, 4, 2), np.random.default_rng(0))
    for p in net.params:
        p[...] = 0
    np.testing.assert_array_equal(net(np.ones(3)), 0.0)
    tiny = MLP((1, 1, 1, 1), params=[np.array([[0.7]]), np.zeros(1), np.array([[-1.3]]), np.zeros(1),
                                     np.array([[2.1]]), np.zeros(1)])
    x = 0.4
    assert tiny(np.array([x]))[0] == pytest.approx(2.1 * math.tanh(-1.3 * math.tanh(0.7 * x)), rel=1e-15)
    rnd = MLP((3, 5, 5, 2), np.random.default_rng(1))
    np.testing.assert_array_equal(rnd(np.ones(3)), rnd(np.ones(3)))
    with pytest.raises(ValueError):
        rnd(np.ones(4))


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(3)
    net = MLP((4, 8, 8, 2), rng)
    x = rng.normal(size=(5, 4))
    w = rng.normal(size=(5, 2))
    out, cache = net.forward(x)
    grads = net.backward(cache, w)
    fd_check(net.params, lambda: float(np.sum(w * net(x))), grads)


def test_backward_linearity_zero_and_stale():
    rng = np.random.default_rng(4)
    net = MLP((4, 8, 8, 2), rng)
    x = rng.normal(size=(3, 4))
    _, cache = net.forward(x)
    g = rng.normal(size=(3, 2))
    g1 = net.backward(cache, g)
    g2 = net.backward(cache, 2 * g)
    for a, b in zip(g1, g2):
        np.testing.assert_allclose(b, 2 * a, rtol=1e-14)
    assert all(np.all(z == 0) for z in net.backward(cache, np.zeros((3, 2))))
    net.touch()
    with pytest.raises(StaleCacheError):
        net.backward(cache, g)


def test_input_grad():
    rng = np.random.default_rng(5)
    net = MLP((3, 6, 6, 1), rng)
    x = rng.normal(size=3)
    _, cache = net.forward(x)
    gi = net.input_grad(cache, np.ones(1))
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1e-6
        assert gi[j] == pytest.approx((net(x + e)[0] - net(x - e)[0]) / 2e-6, rel=1e-5)


def test_gaussian_logprob_examples():
    assert gaussian_logprob(np.array([0.3]), np.array([0.0]), np.array([0.3])) == pytest.approx(
        -0.5 * math.log(2 * math.pi), abs=1e-15)
    assert gaussian_logprob(np.array([0.3]), np.array([0.0]), np.array([1.3])) == pytest.approx(
        -0.5 - 0.5 * math.log(2 * math.pi), abs=1e-15)
    vals = [gaussian_logprob(np.zeros(1), np.zeros(1), np.array([d])) for d in np.linspace(0, 3, 10)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_adam_examples():
    p = [np.array([1.0, -2.0, 3.0])]
    g = [np.array([0.5, -4.0, 1e-3])]
    st = AdamState.for_params(p)
    adam_step(p, g, st, lr=0.01)
    # first step: m_hat = g, v_hat = g^2 -> update = lr * g / (|g| + eps)
    np.testing.assert_allclose(p[0], np.array([1.0, -2.0, 3.0]) - 0.01 * np.sign(g[0]), rtol=1e-5)
    q = [np.array([1.0, 2.0])]
    st = AdamState.for_params(q)
    for _ in range(10):
        adam_step(q, [np.zeros(2)], st, lr=0.1)
    np.testing.assert_array_equal(q[0], [1.0, 2.0])
    a, b = [np.array([0.3, 0.1])], [np.array([0.3, 0.1])]
    sa, sb = AdamState.for_params(a), AdamState.for_params(b)
    r = np.random.default_rng(0)
    for _ in range(5):
        grad = r.normal(size=2)
        adam_step(a, [grad], sa, 0.05)
        adam_step(b, [grad.copy()], sb, 0.05)
    np.testing.assert_array_equal(a[0], b[0])
    with pytest.raises(ValueError):
        adam_step(a, [np.zeros(3)], sa, 0.1)


def test_policy_sampling_statistics():
    rng = np.random.default_rng(7)
    pol = GaussianPolicy(3, 2, (8, 8), rng, init_log_std=math.log(0.7))
    obs = np.ones((100_000, 3))
    a, logp = pol.sample(obs, rng)
    mu = pol.mean(np.ones(3))
    se = 0.7 / math.sqrt(100_000)
    assert np.all(np.abs(a.mean(0) - mu) < 3 * se)
    # standard error of the sample std is sigma / sqrt(2n)
    assert np.all(np.abs(a.std(0) - 0.7) < 3 * 0.7 / math.sqrt(2 * 100_000))
    np.testing.assert_allclose(logp, pol.log_prob(obs, a), rtol=1e-12)


def test_policy_log_std_clamp_and_entropy():
    pol = GaussianPolicy(2, 3, (4, 4), np.random.default_rng(0))
    pol.log_std[:] = [5.0, -30.0, 0.0]
    pol.touch()
    np.testing.assert_array_equal(pol.log_std, [2.0, -20.0, 0.0])
    assert pol.entropy() == pytest.approx(np.sum(pol.log_std + 0.5 + 0.5 * math.log(2 * math.pi)))


def _small_policy(rng):
    pol = GaussianPolicy(4, 2, (8, 8), rng, init_log_std=math.log(0.6), out_gain=1.0)
    return pol


def test_actor_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    pol = _small_policy(rng)
    obs = rng.normal(size=(6, 4))
    acts = pol.mean(obs) + 0.6 * rng.normal(size=(6, 2))
    # behaviour log-probs from a nearby policy so ratios differ from 1
    logp_old = pol.log_prob(obs, acts) + rng.normal(scale=0.05, size=6)
    adv = rng.normal(size=6)
    clip = 0.2
    ratio = np.exp(pol.log_prob(obs, acts) - logp_old)
    assert np.all(np.abs(ratio - (1 - clip)) > 1e-3) and np.all(np.abs(ratio - (1 + clip)) > 1e-3)
    loss, grads, _ = actor_loss_and_grads(pol, obs, acts, logp_old, adv, clip)
    fd_check(pol.params, lambda: actor_loss_and_grads(pol, obs, acts, logp_old, adv, clip)[0], grads)


def test_actor_loss_gradient_single_transition():
    rng = np.random.default_rng(12)
    pol = _small_policy(rng)
    obs = rng.normal(size=(1, 4))
    acts = pol.mean(obs) + 0.3
    logp_old = pol.log_prob(obs, acts) - 0.05
    adv = np.array([0.8])
    loss, grads, _ = actor_loss_and_grads(pol, obs, acts, logp_old, adv, 0.2)
    fd_check(pol.params, lambda: actor_loss_and_grads(pol, obs, acts, logp_old, adv, 0.2)[0], grads)


def test_critic_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(13)
    val = ValueNet(4, (8, 8), rng)
    obs = rng.normal(size=(7, 4))
    tgt = rng.normal(size=7)
    loss, grads = critic_loss_and_grads(val, obs, tgt)
    fd_check(val.params, lambda: critic_loss_and_grads(val, obs, tgt)[0], grads)


def test_checkpoint_roundtrip_and_layout():
    rng = np.random.default_rng(2)
    pol = GaussianPolicy(4, 2, (8, 8), rng)
    val = ValueNet(4, (8, 8), rng)
    st = AgentState(pol, val, AdamState.for_params(pol.params), AdamState.for_params(val.params),
                    np.random.default_rng(99), {"note": "x"})
    adam_step(pol.params, [np.ones_like(p) for p in pol.params], st.adam_actor, 1e-3)
    st.rng.random(3)
    blob = st.to_bytes()
    assert blob[:8] == b"VLCSEE\x00\x01"
    assert int.from_bytes(blob[8:12], "little") == 1
    back = AgentState.from_bytes(blob)
    for a, b in zip(pol.params, back.policy.params):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(val.params, back.value.params):
        np.testing.assert_array_equal(a, b)
    assert back.adam_actor.t == 1 and back.extra == {"note": "x"}
    np.testing.assert_array_equal(back.adam_actor.m[0], st.adam_actor.m[0])
    assert back.rng.random() == st.rng.random()
    with pytest.raises(ValueError):
        loads_checkpoint(b"NOTACKPT" + blob[8:])


def test_checkpoint_records_generic():
    recs = {"a": np.arange(6.0).reshape(2, 3), "s": np.array(3.5), "j": {"k": [1, 2]}}
    back = loads_checkpoint(dumps_checkpoint(recs))
    np.testing.assert_array_equal(back["a"], recs["a"])
    assert back["s"] == 3.5 and back["j"] == {"k": [1, 2]}


def test_forward_backward_adam_deterministic():
    def run():
        rng = np.random.default_rng(21)
        net = MLP((4, 8, 8, 2), rng)
        st = AdamState.for_params(net.params)
        x = rng.normal(size=(5, 4))
        for _ in range(5):
            _, cache = net.forward(x)
            adam_step(net.params, net.backward(cache, np.ones((5, 2))), st, 1e-2)
            net.touch()
        return np.concatenate([p.ravel() for p in net.params])

    np.testing.assert_array_equal(run(), run())
