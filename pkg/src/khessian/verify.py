"""Sampling-based checks of the cone calculus behind h.

Every check returns a :class:`CheckReport` carrying the numeric criterion
it applied, the observed extremes and the worst sample, so failures can
be replayed. Empirical constants are reported, never asserted.
"""
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np

from .errors import SamplingError
from .symfun import (
    ConeSpec,
    gamma_k_margin,
    h_batch,
    mu_inverse,
    mu_transform,
    sigma_all,
    sigma_deleted,
)

CHUNK = 8192
SAMPLE_MARGIN = 1e-6


@dataclass
class SampleSet:
    cone: ConeSpec
    seed: int
    count: int
    points: np.ndarray
    mu: np.ndarray

    @property
    def neg_mask(self):
        return np.any(self.points < 0, axis=1)

    @property
    def neg_points(self):
        return self.points[self.neg_mask]

    def subset(self, count):
        return SampleSet(self.cone, self.seed, count, self.points[:count], self.mu[:count])


@dataclass
class CheckReport:
    name: str
    samples_used: int
    min_observed: float
    max_observed: float
    passed: bool
    worst_point: list
    criterion: str
    status: str = ""
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            self.status = "pass" if self.passed else "fail"

    def to_dict(self):
        d = asdict(self)
        d["worst_point"] = [float(v) for v in self.worst_point]
        return d


def admits_negative_entries(cone):
    """Whether Gamma contains points with a negative coordinate.

    For n = 2 the mu-transform swaps the two entries, so Gamma is the
    positive quadrant when k = 2; every other cone has such points.
    """
    return not (cone.n == 2 and cone.k == 2)


def sample_gamma(cone, count, seed):
    """Draw ``count`` points of Gamma by rejection from mu in [-1, 3]^n.

    Candidates are drawn in fixed-size chunks, so the sample of a smaller
    count is a prefix of the sample of a larger one for the same seed.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    kept = []
    accepted = drawn = 0
    while accepted < count:
        mu = rng.uniform(-1.0, 3.0, size=(CHUNK, cone.n))
        mu = mu[gamma_k_margin(mu, cone) > SAMPLE_MARGIN]
        drawn += CHUNK
        kept.append(mu)
        accepted += len(mu)
        if drawn >= 8 * CHUNK and accepted < 1e-4 * drawn:
            raise SamplingError(f"acceptance rate {accepted / drawn:.2e} too low for {cone}")
    mu = np.concatenate(kept)[:count]
    lam = mu_inverse(mu)
    if count >= 1000 and admits_negative_entries(cone) and not np.any(lam < 0):
        for _ in range(1000):
            cand = rng.uniform(-1.0, 3.0, size=(CHUNK, cone.n))
            cand = cand[gamma_k_margin(cand, cone) > SAMPLE_MARGIN]
            neg = np.any(mu_inverse(cand) < 0, axis=1)
            if np.any(neg):
                mu[-1] = cand[np.argmax(neg)]
                lam = mu_inverse(mu)
                break
        else:
            raise SamplingError(f"no negative-entry sample found for {cone}")
    return SampleSet(cone, seed, count, lam, mu)


def check_euler(samples, tol=1e-10):
    """sum h_i lam_i = sum tilde_i mu_i = h > 0 at every sample."""
    lam, mu = samples.points, samples.mu
    value, grad, tilde = h_batch(lam, samples.cone)
    e1 = np.abs(np.sum(grad * lam, axis=1) - value)
    e2 = np.abs(np.sum(tilde * mu, axis=1) - value)
    err = np.maximum(e1, e2) / (1.0 + np.abs(value))
    w = int(np.argmax(err))
    passed = bool(np.all(err <= tol) and np.all(value > 0))
    return CheckReport("euler", len(lam), float(value.min()), float(err.max()), passed, lam[w].tolist(),
                       f"max |sum h_i lam_i - h|, |sum tilde_i mu_i - h| / (1 + h) <= {tol:g}, h > 0")


def fd_check_hgrad(samples, step=1e-6, min_margin=0.1, tol=1e-5):
    """Central differences of h against the analytic gradient."""
    cone = samples.cone
    margin = gamma_k_margin(samples.mu, cone)
    lam = samples.points[margin >= min_margin]
    if len(lam) == 0:
        return CheckReport("fd_hgrad", 0, np.nan, np.nan, False, [], "no samples above margin",
                           status="inconclusive")
    _, grad, _ = h_batch(lam, cone)
    fd = np.empty_like(grad)
    for i in range(cone.n):
        e = np.zeros(cone.n)
        e[i] = step
        hp, _, _ = h_batch(lam + e, cone)
        hm, _, _ = h_batch(lam - e, cone)
        fd[:, i] = (hp - hm) / (2 * step)
    rel = np.abs(fd - grad).max(axis=1) / np.abs(grad).max(axis=1)
    w = int(np.argmax(rel))
    return CheckReport("fd_hgrad", len(lam), float(rel.min()), float(rel.max()), bool(rel.max() <= tol),
                       lam[w].tolist(),
                       f"max_i |fd_i - h_i| / max_i |h_i| <= {tol:g} at step {step:g}, margin >= {min_margin:g}")


def check_concavity(samples, pairs=None, tol=1e-10):
    """Midpoint concavity of h on pairs of samples.

    By default sample i is paired with sample i + N/2.
    """
    lam = samples.points
    if pairs is None:
        half = len(lam) // 2
        pairs = np.stack([np.arange(half), np.arange(half, 2 * half)], axis=1)
    pairs = np.asarray(pairs)
    a, b = lam[pairs[:, 0]], lam[pairs[:, 1]]
    ha, _, _ = h_batch(a, samples.cone)
    hb, _, _ = h_batch(b, samples.cone)
    hm, _, _ = h_batch(0.5 * (a + b), samples.cone)
    gap = hm - 0.5 * (ha + hb)
    w = int(np.argmin(gap))
    return CheckReport("concavity", len(pairs), float(gap.min()), float(gap.max()), bool(gap.min() >= -tol),
                       np.concatenate([a[w], b[w]]).tolist(),
                       f"h((a+b)/2) - (h(a)+h(b))/2 >= -{tol:g}")


def check_lemma22(samples, rtol=1e-12):
    """Lower bound of h_j at negative entries, with the two proof steps.

    Reports the empirical nu0 = min h_j / (1 + sum h_i) over entries
    lam_j < 0 and the empirical C = min sum_i tilde_i. The proof's
    comparison tilde_j <= tilde_l is checked for every positive entry l,
    as is h_j >= (1/2) sum tilde.
    """
    cone = samples.cone
    lam = samples.points
    _, grad, tilde = h_batch(lam, cone)
    tsum = tilde.sum(axis=1)
    consts = {"C_nk": float(tsum.min())}
    neg = lam < 0
    rows = np.flatnonzero(neg.any(axis=1))
    crit = "min h_j/(1+sum h_i) > 0 over lam_j < 0; tilde_j <= tilde_l for lam_l > 0; 2 h_j >= sum tilde"
    if rows.size == 0:
        if admits_negative_entries(cone):
            return CheckReport("lemma22", 0, np.nan, np.nan, False, [], crit, status="inconclusive",
                               constants=consts)
        consts["note"] = "Gamma lies in the positive orthant; the statement is vacuous"
        return CheckReport("lemma22", 0, np.nan, np.nan, True, [], crit, constants=consts)
    L, Gr, T = lam[rows], grad[rows], tilde[rows]
    ratio = np.where(L < 0, Gr / (1.0 + Gr.sum(axis=1, keepdims=True)), np.inf)
    rmin = ratio.min(axis=1)
    # tilde_j <= tilde_l whenever lam_j < 0 < lam_l
    tneg = np.where(L < 0, T, -np.inf).max(axis=1)
    tpos = np.where(L > 0, T, np.inf).min(axis=1)
    step_ok = tneg <= tpos * (1.0 + rtol)
    half_ok = np.all(np.where(L < 0, 2.0 * Gr >= T.sum(axis=1, keepdims=True) * (1.0 - rtol), True), axis=1)
    w = int(np.argmin(rmin))
    consts.update({"nu0": float(rmin.min()), "step_violations": int((~step_ok).sum()),
                   "half_sum_violations": int((~half_ok).sum()), "negative_samples": int(rows.size)})
    passed = bool(rmin.min() > 0 and step_ok.all() and half_ok.all() and tsum.min() > 0)
    return CheckReport("lemma22", int(rows.size), float(rmin.min()), float(rmin.max()), passed,
                       L[w].tolist(), crit, constants=consts)


def product_bound_rhs(mu, cone):
    """(k^n / n^n) C(n,k)^(n/k) sigma_k(mu)^(n(k-1)/k)."""
    n, k = cone.n, cone.k
    sk = sigma_all(k, mu)[:, k]
    return (k**n / n**n) * comb(n, k) ** (n / k) * sk ** (n * (k - 1) / k)


def check_product_bound(samples, f1=0.5, f2=2.0, rtol=1e-10):
    """Product lower bounds for the derivatives of h on a level band.

    Samples are rescaled by homogeneity into f1 <= h <= f2. Checks
    prod_i sigma_{k-1;i}(mu) >= (k^n/n^n) C(n,k)^{n/k} sigma_k(mu)^{n(k-1)/k}
    and prod h_i >= prod tilde_i; reports c0 = min prod tilde_i.
    """
    if not 0 < f1 < f2:
        raise ValueError("need 0 < f1 < f2")
    cone = samples.cone
    lam = samples.points
    h0, _, _ = h_batch(lam, cone)
    lam = lam * (np.clip(h0, f1, f2) / h0)[:, None]
    h, grad, tilde = h_batch(lam, cone)
    band = (h >= f1 * (1 - 1e-9)) & (h <= f2 * (1 + 1e-9))
    lam, h, grad, tilde = lam[band], h[band], grad[band], tilde[band]
    crit = f"explicit sigma_(k-1;i) product bound and prod h_i >= prod tilde_i (rtol {rtol:g}) on {f1:g} <= h <= {f2:g}"
    if len(lam) == 0:
        return CheckReport("product_bound", 0, np.nan, np.nan, False, [], crit, status="inconclusive")
    mu = mu_transform(lam)
    lhs = np.prod(sigma_deleted(cone.k - 1, mu), axis=1)
    rhs = product_bound_rhs(mu, cone)
    ratio = lhs / rhs
    ph, pt = np.prod(grad, axis=1), np.prod(tilde, axis=1)
    ok1 = lhs >= rhs * (1.0 - rtol)
    ok2 = ph >= pt * (1.0 - rtol)
    w = int(np.argmin(ratio))
    consts = {"c0": float(pt.min()), "min_hprod_over_tildeprod": float((ph / pt).min())}
    return CheckReport("product_bound", len(lam), float(ratio.min()), float(ratio.max()),
                       bool(ok1.all() and ok2.all()), lam[w].tolist(), crit, constants=consts)


def check_growth(rhs, k, box, samples=4000, seed=0, zrange=(-1.0, 1.0), pmax=1e3, pmin_check=10.0):
    """Gradient growth conditions on f^{1/k} and the bound on -f_z/f.

    Samples x uniformly in ``box = (lo, hi)``, z in ``zrange`` and p with
    log-spaced length up to ``pmax`` in random directions. The two growth
    inequalities must hold wherever |p| >= pmin_check.
    """
    crit = f"growth inequalities at |p| >= {pmin_check:g}"
    if rhs.growth is None or not rhs.has_partials:
        return CheckReport("growth", 0, np.nan, np.nan, False, [], crit, status="inconclusive")
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
    n = lo.size
    x = rng.uniform(lo, hi, size=(samples, n))
    z = rng.uniform(zrange[0], zrange[1], size=samples)
    d = rng.normal(size=(samples, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = np.logspace(-2, np.log10(pmax), samples)
    p = d * r[:, None]
    f = rhs.f(x, z, p)
    scale = f ** (1.0 / k - 1.0) / k
    ft_p = scale[:, None] * rhs.f_p(x, z, p)
    ft_x = scale[:, None] * rhs.f_x(x, z, p)
    ft_z = scale * rhs.f_z(x, z, p)
    fbar = rhs.growth.fbar(x, z)
    g1 = np.sum(p * ft_p, axis=1) - fbar * (1.0 + r ** rhs.growth.gamma1)
    g2 = np.sum(p * ft_x, axis=1) + r**2 * ft_z + fbar * (1.0 + r ** rhs.growth.gamma2)
    big = r >= pmin_check
    slack = np.minimum(-g1, g2)
    w = int(np.argmin(np.where(big, slack, np.inf)))
    consts = {"sup_minus_fz_over_f": float(np.max(-rhs.f_z(x, z, p) / f)),
              "gamma1": rhs.growth.gamma1, "gamma2": rhs.growth.gamma2}
    passed = bool(np.all(slack[big] >= 0))
    return CheckReport("growth", int(big.sum()), float(slack[big].min()), float(slack[big].max()), passed,
                       np.concatenate([x[w], [z[w]], p[w]]).tolist(), crit, constants=consts)


def run_all(cone, count, seed, f1=0.5, f2=2.0):
    """Run every cone check on one sample set."""
    samples = sample_gamma(cone, count, seed)
    return [
        check_euler(samples),
        fd_check_hgrad(samples),
        check_concavity(samples),
        check_lemma22(samples),
        check_product_bound(samples, f1, f2),
    ]
