"""Brute-force reference implementations used to pin expected values.

Everything here is written the slow, obvious way: python lists, explicit
loops, the math module.  Nothing is imported from the package, so agreement
between the two is evidence, not tautology.  The semicircular reference uses
a rotation construction (orthonormalize, then walk the angle) that is
algebraically equal to the package's sine-ratio form but shares none of its
code path.
"""

import math


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def norm(a):
    return math.sqrt(dot(a, a))


def sub(a, b):
    return [x - y for x, y in zip(a, b)]


def add(a, b):
    return [x + y for x, y in zip(a, b)]


def scale(a, c):
    return [c * x for x in a]


def softmax_probs(logits):
    m = max(logits)
    exps = [math.exp(z - m) for z in logits]
    total = sum(exps)
    return [e / total for e in exps]


def sim_value(kind, f, p, s=6.0):
    if kind == "euclidean_t":
        d = sub(f, p)
        return -math.log(1.0 + dot(d, d))
    if kind == "cosine":
        return s * dot(f, p) / (norm(f) * norm(p))
    if kind == "neg_euclidean":
        return -norm(sub(f, p))
    raise ValueError(kind)


def linear_proxies(v0, num_classes):
    return [scale(v0, float(k)) for k in range(num_classes)]


def semicircular_proxies(v0, v1, num_classes):
    u0 = scale(v0, 1.0 / norm(v0))
    u1 = scale(v1, 1.0 / norm(v1))
    w = sub(u1, scale(u0, dot(u0, u1)))
    w = scale(w, 1.0 / norm(w))
    beta = math.pi / (num_classes - 1)
    return [
        add(scale(u0, math.cos(k * beta)), scale(w, math.sin(k * beta)))
        for k in range(num_classes)
    ]


def free_proxies(vectors, num_classes):
    assert len(vectors) == num_classes
    return [list(v) for v in vectors]


def assignment_probs(kind, f, proxies, s=6.0):
    return softmax_probs([sim_value(kind, f, p, s) for p in proxies])


def proxy_probs(kind, k_star, proxies, s=6.0):
    return softmax_probs([sim_value(kind, proxies[k_star], p, s) for p in proxies])


def poisson_scores(num_classes, k_star, tau):
    lam = k_star + 0.5
    return [
        (k * math.log(lam) - lam - math.log(math.factorial(k))) / tau
        for k in range(num_classes)
    ]


def binomial_scores(num_classes, k_star, tau):
    n = num_classes - 1
    p = (2 * k_star + 1) / (2 * num_classes)
    return [
        (math.log(math.comb(n, k)) + k * math.log(p) + (n - k) * math.log(1.0 - p))
        / tau
        for k in range(num_classes)
    ]


def exponential_probs(num_classes, k_star, tau):
    w = [math.exp(-abs(k - k_star) / tau) for k in range(num_classes)]
    total = sum(w)
    return [x / total for x in w]


def triangular_probs(num_classes, k_star, peak, floor):
    span = max(k_star, num_classes - 1 - k_star)
    f = [peak - (peak - floor) * abs(k - k_star) / span for k in range(num_classes)]
    total = sum(f)
    return [x / total for x in f]


def unimodal_target_probs(
    kind,
    num_classes,
    k_star,
    tau_p=0.11,
    tau_b=0.13,
    tau_e=30.0,
    peak=0.9,
    floor=0.1,
    normalization=None,
):
    if kind == "poisson":
        scores = poisson_scores(num_classes, k_star, tau_p)
        default = "softmax"
    elif kind == "binomial":
        scores = binomial_scores(num_classes, k_star, tau_b)
        default = "softmax"
    elif kind == "exponential":
        scores = exponential_probs(num_classes, k_star, tau_e)
        default = "direct"
    elif kind == "triangular":
        scores = triangular_probs(num_classes, k_star, peak, floor)
        default = "direct"
    else:
        raise ValueError(kind)
    mode = normalization or default
    if mode == "softmax":
        return softmax_probs(scores)
    total = sum(scores)
    return [x / total for x in scores]


def kl_scaled(target, pred):
    """(1/K) * KL(target || pred) over probability lists."""
    k = len(target)
    total = 0.0
    for q, p in zip(target, pred):
        if q > 0.0:
            total += q * math.log(q / p)
    return total / k


def loss_basic_value(kind, f, proxies, k_star, s=6.0):
    q = proxy_probs(kind, k_star, proxies, s)
    p = assignment_probs(kind, f, proxies, s)
    return kl_scaled(q, p)


def loss_unimodal_value(kind, proxies, k_star, smoothing_kind, s=6.0, **smooth_kw):
    q = proxy_probs(kind, k_star, proxies, s)
    u = unimodal_target_probs(smoothing_kind, len(proxies), k_star, **smooth_kw)
    return kl_scaled(u, q)


def cross_entropy_value(kind, f, proxies, k_star, s=6.0):
    p = assignment_probs(kind, f, proxies, s)
    return -math.log(p[k_star])


def central_difference(fn, x0, step=1e-5):
    """Central finite-difference gradient of a scalar function of a flat list."""
    grad = []
    for i in range(len(x0)):
        plus = list(x0)
        minus = list(x0)
        plus[i] += step
        minus[i] -= step
        grad.append((fn(plus) - fn(minus)) / (2.0 * step))
    return grad


def max_rel_error(analytic, reference, floor=1e-6):
    """Worst componentwise |a - r| / max(|a|, |r|, floor)."""
    worst = 0.0
    for a, r in zip(analytic, reference):
        denom = max(abs(a), abs(r), floor)
        worst = max(worst, abs(a - r) / denom)
    return worst
