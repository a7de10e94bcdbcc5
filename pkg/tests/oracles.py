"""Independent reference implementations used to check the package.

Everything here is written directly from the defining formulas in plain
Python (with `math`, no numpy), favoring obviousness over speed.  Tests
compare library results against these; nothing here imports the library.
"""

import math


def oracle_entropy(probs):
    total = 0.0
    for p in probs:
        p = float(p)
        if p > 0.0:
            total -= p * math.log(p)
    return total


def oracle_softmax(logits):
    m = max(float(z) for z in logits)
    exps = [math.exp(float(z) - m) for z in logits]
    s = sum(exps)
    return [e / s for e in exps]


def oracle_sq_dist(u, v):
    total = 0.0
    for a, b in zip(u, v):
        d = float(a) - float(b)
        total += d * d
    return total


def oracle_dsa(train_traces, train_classes, query, query_class):
    """Two-stage exhaustive nearest-neighbor surprise.

    Stage 1: nearest training trace with the query's class (ties -> smallest
    training index).  Stage 2: nearest training trace of any other class to
    that anchor.  Score = sqrt(d1) / sqrt(d2); 0 when d1 == 0, inf when
    d2 == 0.
    """
    best_i = None
    best_d1 = None
    for i, (trace, cls) in enumerate(zip(train_traces, train_classes)):
        if int(cls) != int(query_class):
            continue
        d = oracle_sq_dist(trace, query)
        if best_d1 is None or d < best_d1:
            best_d1 = d
            best_i = i
    if best_d1 is None:
        raise ValueError(f"no training trace of class {query_class}")
    if best_d1 == 0.0:
        return 0.0
    anchor = train_traces[best_i]
    best_d2 = None
    for trace, cls in zip(train_traces, train_classes):
        if int(cls) == int(query_class):
            continue
        d = oracle_sq_dist(trace, anchor)
        if best_d2 is None or d < best_d2:
            best_d2 = d
    if best_d2 is None:
        raise ValueError("no training trace of any other class")
    if best_d2 == 0.0:
        return math.inf
    return math.sqrt(best_d1) / math.sqrt(best_d2)


def oracle_conv2d(x, kernel, bias, stride, padding):
    """Direct convolution loops; x is [H][W][C] nested lists or array-likes,
    kernel [out_c][in_c][kh][kw]."""
    h = len(x)
    w = len(x[0])
    in_c = len(x[0][0])
    out_c = len(kernel)
    kh = len(kernel[0][0])
    kw = len(kernel[0][0][0])

    def out_size(size, k):
        if padding == "same":
            return -(-size // stride)
        return (size - k) // stride + 1

    def pads(size, k):
        if padding == "valid":
            return 0
        total = max((out_size(size, k) - 1) * stride + k - size, 0)
        lo = total // 2
        return lo

    pad_top = pads(h, kh)
    pad_left = pads(w, kw)
    oh = out_size(h, kh)
    ow = out_size(w, kw)

    out = [[[0.0] * out_c for _ in range(ow)] for _ in range(oh)]
    for oy in range(oh):
        for ox in range(ow):
            for oc in range(out_c):
                acc = float(bias[oc])
                for ic in range(in_c):
                    for ky in range(kh):
                        for kx in range(kw):
                            iy = oy * stride + ky - pad_top
                            ix = ox * stride + kx - pad_left
                            if 0 <= iy < h and 0 <= ix < w:
                                acc += float(x[iy][ix][ic]) * float(kernel[oc][ic][ky][kx])
                out[oy][ox][oc] = acc
    return out


def oracle_maxpool2d(x, kernel, stride):
    h = len(x)
    w = len(x[0])
    c = len(x[0][0])
    oh = (h - kernel) // stride + 1
    ow = (w - kernel) // stride + 1
    out = [[[0.0] * c for _ in range(ow)] for _ in range(oh)]
    for oy in range(oh):
        for ox in range(ow):
            for ch in range(c):
                best = -math.inf
                for ky in range(kernel):
                    for kx in range(kernel):
                        best = max(best, float(x[oy * stride + ky][ox * stride + kx][ch]))
                out[oy][ox][ch] = best
    return out


def oracle_prefix_counts(perm, is_error):
    counts = []
    running = 0
    for idx in perm:
        running += 1 if is_error[idx] else 0
        counts.append(running)
    return counts


def oracle_apfd(cum_errors):
    n = len(cum_errors)
    m = cum_errors[-1]
    auc = sum(cum_errors)
    ideal = sum(min(k, m) for k in range(1, n + 1))
    return 100.0 * auc / ideal


def oracle_mae(pred, truth):
    return sum(abs(float(a) - float(b)) for a, b in zip(pred, truth)) / len(pred)
