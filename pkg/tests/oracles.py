"""Independent reference implementations used as test oracles.

Nothing here imports the code under test except the Tensor type needed to
feed perturbed values back through a forward function.
"""

import numpy as np

from videoqa import tensorcore as tc


def naive_conv2d(x, k, b, stride, pad):
    n, c, h, w = x.shape
    m, _, d, _ = k.shape
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad))
    xp[:, :, pad:pad + h, pad:pad + w] = x
    ho = (h + 2 * pad - d) // stride + 1
    wo = (w + 2 * pad - d) // stride + 1
    out = np.zeros((n, m, ho, wo))
    for ni in range(n):
        for mi in range(m):
            for i in range(ho):
                for j in range(wo):
                    acc = float(b[mi])
                    for ci in range(c):
                        for u in range(d):
                            for v in range(d):
                                acc += xp[ni, ci, i * stride + u, j * stride + v] * k[mi, ci, u, v]
                    out[ni, mi, i, j] = acc
    return out


def naive_conv1d_temporal(x, k, b, stride, pad):
    n, c, f, l = x.shape
    m, _, t = k.shape
    xp = np.zeros((n, c, f + 2 * pad, l))
    xp[:, :, pad:pad + f, :] = x
    fo = (f + 2 * pad - t) // stride + 1
    out = np.zeros((n, m, fo, l))
    for ni in range(n):
        for mi in range(m):
            for i in range(fo):
                for p in range(l):
                    acc = float(b[mi])
                    for ci in range(c):
                        for u in range(t):
                            acc += xp[ni, ci, i * stride + u, p] * k[mi, ci, u]
                    out[ni, mi, i, p] = acc
    return out


def central_difference(f, arrays, index, eps=1e-3):
    """d f / d arrays[which][pos] by central differences; ``index=(which, pos)``."""
    which, pos = index
    arr = arrays[which]
    old = arr[pos]
    arr[pos] = old + eps
    fp = f()
    arr[pos] = old - eps
    fm = f()
    arr[pos] = old
    return (fp - fm) / (2 * eps)


def relative_error(analytic, numeric, floor=1e-6):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def gradcheck(build, params, n_coords=30, seed=0, eps=1e-3):
    """Max relative error between backward and central differences."""
    with tc.precision(np.float64):
        ps = [tc.Parameter(p.astype(np.float64), f"p{i}") for i, p in enumerate(params)]

        def loss_value():
            return build(*ps).item()

        with tc.ComputeGraph() as g:
            loss = build(*ps)
        tc.zero_grads(ps)
        tc.backward(loss, g)
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_coords):
            which = int(rng.integers(len(ps)))
            pos = tuple(int(rng.integers(s)) for s in ps[which].shape)
            numeric = central_difference(loss_value, [p.data for p in ps], (which, pos), eps)
            worst = max(worst, relative_error(ps[which].grad[pos], numeric))
    return worst


# ---------------------------------------------------------------- program oracle

def brute_force_answer(program, graph):
    """Evaluate a program by recursive per-object membership on raw coordinates.

    Returns ``(kind, value)`` or the string ``"undefined"`` when a relation
    anchor is invisible, or ``"ambiguous"`` for a query without a unique
    referent. Independent of the executor: relations are recomputed from
    world coordinates here.
    """
    import math

    steps = program.steps[:-1]
    frames = []
    f = 0
    for s in steps:
        if s.op == "AtFrame":
            f = s.arg
        frames.append(f)

    def holds(rel, o, a, frame):
        (xo, yo, _), (xa, ya, _) = graph.objects[o].frames[frame].world, graph.objects[a].frames[frame].world
        if rel == "Left":
            return xa - xo > 1e-9
        if rel == "Right":
            return xo - xa > 1e-9
        if rel == "Behind":
            return yo - ya > 1e-9
        if rel == "Front":
            return ya - yo > 1e-9
        return math.hypot(xo - xa, yo - ya) < 0.2 * graph.world_width

    def vis(o, frame):
        return graph.objects[o].frames[frame].visible

    def member(i, o):
        if i < 0:
            return True
        s = steps[i]
        if s.op == "FilterShape":
            return member(i - 1, o) and graph.objects[o].shape.value == s.arg.value
        if s.op == "FilterColor":
            return member(i - 1, o) and graph.objects[o].color.value == s.arg.value
        if s.op == "AtFrame":
            return member(i - 1, o) and vis(o, s.arg)
        return vis(o, frames[i]) and any(
            member(s.ref, a) and a != o and holds(s.arg.value, o, a, frames[i]) for a in range(graph.n))

    for i, s in enumerate(steps):
        if s.op == "Relate" and any(member(s.ref, a) and not vis(a, frames[i]) for a in range(graph.n)):
            return "undefined"
    chosen = [o for o in range(graph.n) if member(len(steps) - 1, o)]
    frame = frames[-1] if frames else 0
    op = program.terminal.op
    if op == "Count":
        return ("count", len(chosen))
    if op == "Exist":
        return ("bool", len(chosen) > 0)
    if len(chosen) != 1:
        return "ambiguous"
    o = graph.objects[chosen[0]]
    if op == "QueryColor":
        return ("color", o.color)
    if op == "QueryShape":
        return ("shape", o.shape)
    if op == "QueryLocation":
        return ("location", (frame, o.frames[frame].pixel))
    return ("actions", tuple(e.kind.value for e in sorted(
        (e for e in graph.events if e.subject == o.id), key=lambda e: (e.start, e.end))))
