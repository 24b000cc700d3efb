#!/usr/bin/env python3
"""Regenerate the bundled fixtures under data/.

Everything is seeded; rerunning gives the same files on the same numpy.
  data/toy/               1 -> 2 -> 1 network, box [-2, 2], 1 <= y <= 1.02
  data/double_integrator/ 2-10-5-1 policy cloned from a saturated linear law
  data/ood/               2-16-16-3 classifier, class 2 = out of distribution
  data/config/default.json
"""
import argparse
import json
import pathlib

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data"


def dump(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1) + "\n")


def net_json(params):
    return {"layers": [{"weights": W.tolist(), "bias": b.tolist()} for W, b in params]}


def init(sizes, rng):
    params = []
    for i, o in zip(sizes[:-1], sizes[1:]):
        params.append((rng.normal(0.0, np.sqrt(2.0 / i), (o, i)), np.zeros(o)))
    return params


def forward(params, X):
    acts = [X]
    h = X
    for k, (W, b) in enumerate(params):
        h = h @ W.T + b
        if k + 1 < len(params):
            h = np.maximum(h, 0.0)
        acts.append(h)
    return acts


def backward(params, acts, dout):
    grads = []
    g = dout
    for k in reversed(range(len(params))):
        W, _ = params[k]
        grads.append((g.T @ acts[k], g.sum(0)))
        if k > 0:
            g = (g @ W) * (acts[k] > 0)
    return grads[::-1]


def adam(params, loss_grad, steps, lr, rng_batches):
    m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    b1, b2, eps = 0.9, 0.999, 1e-8
    for t in range(1, steps + 1):
        batch = next(rng_batches)
        loss, grads = loss_grad(params, batch)
        new = []
        for k, ((W, b), (gW, gb)) in enumerate(zip(params, grads)):
            mW, mb = m[k]
            vW, vb = v[k]
            mW = b1 * mW + (1 - b1) * gW
            mb = b1 * mb + (1 - b1) * gb
            vW = b2 * vW + (1 - b2) * gW**2
            vb = b2 * vb + (1 - b2) * gb**2
            m[k], v[k] = (mW, mb), (vW, vb)
            c1, c2 = 1 - b1**t, 1 - b2**t
            W = W - lr * (mW / c1) / (np.sqrt(vW / c2) + eps)
            b = b - lr * (mb / c1) / (np.sqrt(vb / c2) + eps)
            new.append((W, b))
        params = new
    return params, loss


def toy():
    net = {"layers": [{"weights": [[1.0], [1.0]], "bias": [0.0, 1.0]},
                      {"weights": [[1.0, 1.0]], "bias": [0.0]}]}
    dump(ROOT / "toy/net.json", net)
    dump(ROOT / "toy/box.json", {"lo": [-2.0], "hi": [2.0]})
    dump(ROOT / "toy/outset.json", {"H": [[-1.0], [1.0]], "d": [1.0, -1.02]})


# Weakly damped rotation; the clip makes the law piecewise linear on the box.
DI_A = np.array([[1.0, 1.0], [0.0, 1.0]])
DI_B = np.array([[0.5], [1.0]])
DI_K = np.array([-0.05, -0.1])
DI_SAT = 0.3
DI_LO = np.array([-8.0, -1.0])
DI_HI = np.array([6.0, 2.5])
OBSTACLE = {"H": [[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]], "d": [4.5, -5.0, -0.25, -0.25]}


def double_integrator(seed):
    rng = np.random.default_rng(seed)
    params = init([2, 10, 5, 1], rng)
    # widen the sampling box a little so the fit is good at the edges
    lo, hi = DI_LO - 1.0, DI_HI + 1.0

    def batches():
        while True:
            X = rng.uniform(lo, hi, (512, 2))
            yield X, np.clip(X @ DI_K, -DI_SAT, DI_SAT)[:, None]

    def loss_grad(p, batch):
        X, y = batch
        acts = forward(p, X)
        r = acts[-1] - y
        return float((r**2).mean()), backward(p, acts, 2.0 * r / len(X))

    params, loss = adam(params, loss_grad, 6000, 3e-3, batches())
    print(f"double integrator policy mse {loss:.2e}")

    dump(ROOT / "double_integrator/policy.json", net_json(params))
    dump(ROOT / "double_integrator/dynamics.json", {"A": DI_A.tolist(), "B": DI_B.tolist()})
    dump(ROOT / "double_integrator/obstacle.json", OBSTACLE)
    dump(ROOT / "double_integrator/box.json", {"lo": DI_LO.tolist(), "hi": DI_HI.tolist()})

    # every backward-reachable set up to 10 steps must be non-empty in the box
    X = np.random.default_rng(seed + 1).uniform(DI_LO, DI_HI, (400000, 2))
    s = X
    H, d = np.array(OBSTACLE["H"]), np.array(OBSTACLE["d"])
    for t in range(1, 11):
        u = forward(params, s)[-1]
        s = s @ DI_A.T + u @ DI_B.T
        hits = int(((s @ H.T + d) <= 0).all(1).sum())
        print(f"  step {t}: {hits} of {len(X)} samples reach the obstacle")
        assert hits > 0, "empty backward reachable set"


def ood(seed):
    rng = np.random.default_rng(seed)
    n = 1500
    # two in-distribution blobs on a diagonal, everything else is class 2
    c0 = rng.normal([-1.0, 1.0], 0.35, (n, 2))
    c1 = rng.normal([1.0, -1.0], 0.35, (n, 2))
    far = rng.uniform(-2.5, 2.5, (6 * n, 2))
    keep = (np.linalg.norm(far - [-1.0, 1.0], axis=1) > 1.1) & (np.linalg.norm(far - [1.0, -1.0], axis=1) > 1.1)
    far = far[keep]
    X = np.vstack([c0, c1, far])
    y = np.concatenate([np.zeros(n, int), np.ones(n, int), np.full(len(far), 2)])

    params = init([2, 16, 16, 3], rng)

    def batches():
        while True:
            idx = rng.integers(0, len(X), 256)
            yield X[idx], y[idx]

    def loss_grad(p, batch):
        Xb, yb = batch
        acts = forward(p, Xb)
        z = acts[-1] - acts[-1].max(1, keepdims=True)
        pr = np.exp(z)
        pr /= pr.sum(1, keepdims=True)
        loss = -np.log(pr[np.arange(len(yb)), yb] + 1e-12).mean()
        g = pr.copy()
        g[np.arange(len(yb)), yb] -= 1.0
        return float(loss), backward(p, acts, g / len(yb))

    params, loss = adam(params, loss_grad, 8000, 3e-3, batches())
    acc = (forward(params, X)[-1].argmax(1) == y).mean()
    print(f"ood classifier loss {loss:.3f} train accuracy {acc:.3f}")

    dump(ROOT / "ood/classifier.json", net_json(params))
    dump(ROOT / "ood/box.json", {"lo": [-2.5, -2.5], "hi": [2.5, 2.5]})
    # on the max-gap scalar g = max(y0, y1) - y2: in distribution iff g >= 0
    dump(ROOT / "ood/outset.json", {"H": [[-1.0]], "d": [0.0]})


def config():
    dump(ROOT / "config/default.json", {"iters": 200, "lr": 0.1, "lr_decay": 0.98, "tolerance": 1e-4,
                                        "max_sweeps": 50, "alpha_init": 0.5, "gamma_init": 0.025,
                                        "check_every": 10})


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    toy()
    double_integrator(args.seed)
    ood(args.seed)
    config()


if __name__ == "__main__":
    main()
