"""Deviation constants of the l1 sketch and their empirical estimation.

For a Gaussian sensing matrix, (1/M)||phi @ u||_1 concentrates around
sqrt(2/pi) * ||u||_2 on sparse vectors, and the sign-correlation
(1/M) <sign(phi @ u), phi @ v> concentrates around 0 on orthogonal
sparse pairs.  This module evaluates both single-vector deviations,
searches for worst cases over sparse supports (reporting certified
lower bounds with re-checkable witnesses), decides the recovery
condition  norm_dev + cross_dev <= sqrt(2/pi) - 1/2,  and exposes the
sample-complexity and concentration-probability formulas

    M >= C * delta**-6 * K * log(2N/K),     1 - 8 * exp(-c * delta**2 * M),

whose constants C and c are universal but unspecified; callers must
supply their own values (the defaults C = c = 1 are placeholders, not
calibrated).

True worst-case deviations are NP-hard to certify in general: the
searches below enumerate supports exhaustively only at small scale, and
even then the per-support sphere maximization is a multi-start ascent
heuristic.  A "satisfied" verdict therefore certifies the support
enumeration, with that caveat.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import core
from .generators import gen_gaussian_matrix
from .rng import RngSpec, Stream

VERDICT_SATISFIED = "satisfied"
VERDICT_VIOLATED = "violated"
VERDICT_INCONCLUSIVE = "inconclusive"


def half_normal_mean() -> float:
    """E|g| for standard normal g: sqrt(2/pi), the sketch calibration."""
    return math.sqrt(2.0 / math.pi)


def l1_norm_deviation(phi, u, calibration: float = None) -> float:
    """Relative deviation of the l1 sketch on a single vector:
    |(1/M)||phi u||_1 - nu ||u||_2| / ||u||_2 with nu = sqrt(2/pi) by default."""
    phi = core.as_matrix(phi, "phi")
    u = core.as_vector(u, "u")
    if u.size != phi.shape[1]:
        raise ValueError("u length does not match phi columns")
    nu = half_normal_mean() if calibration is None else float(calibration)
    u_norm = core.norm_lp(u, 2)
    if u_norm == 0.0:
        raise ValueError("u must be nonzero")
    sketch = float(np.sum(np.abs(phi @ u))) / phi.shape[0]
    return abs(sketch - nu * u_norm) / u_norm


def sign_cross_deviation(phi, u, v) -> float:
    """|(1/M) <sign_vec(phi u), phi v>| / ||v||_2 on an orthogonal pair.

    Uses the sign(0) = -1 convention of core.sign_vec.  Raises unless
    |<u, v>| <= 1e-12 ||u|| ||v||.
    """
    phi = core.as_matrix(phi, "phi")
    u = core.as_vector(u, "u")
    v = core.as_vector(v, "v")
    if u.size != phi.shape[1] or v.size != phi.shape[1]:
        raise ValueError("u/v length does not match phi columns")
    u_norm = core.norm_lp(u, 2)
    v_norm = core.norm_lp(v, 2)
    if u_norm == 0.0 or v_norm == 0.0:
        raise ValueError("u and v must be nonzero")
    if abs(float(u @ v)) > 1e-12 * u_norm * v_norm:
        raise ValueError("u and v must be orthogonal (within 1e-12 relative)")
    signs = core.sign_vec(phi @ u)
    return abs(float(signs @ (phi @ v))) / phi.shape[0] / v_norm


@dataclass(frozen=True)
class SearchBudget:
    """Effort knobs for the worst-case deviation searches."""

    num_supports: int = 64        # sampled mode: supports tried for the norm bound
    num_pairs: int = 128          # sampled mode: support pairs tried for the cross bound
    starts: int = 6               # random restarts per support / pair
    steps: int = 40               # ascent steps per restart
    exhaustive_cap: int = 10_000  # enumerate supports when the count fits
    overlap_share: float = 0.5    # fraction of sampled pairs with overlapping supports

    def engaged(self) -> bool:
        return self.starts >= 1 and (self.num_supports >= 1 or self.num_pairs >= 1)


@dataclass
class DeviationWitness:
    """(support, coefficients) certificate that re-evaluates to the bound."""

    value: float
    u_indices: list
    u_coeffs: list
    v_indices: list = None
    v_coeffs: list = None

    def u_vector(self, n: int) -> np.ndarray:
        return core.embed(self.u_coeffs, self.u_indices, n)

    def v_vector(self, n: int) -> np.ndarray:
        return core.embed(self.v_coeffs, self.v_indices, n)

    def as_dict(self) -> dict:
        out = {"value": self.value,
               "u_indices": list(self.u_indices), "u_coeffs": list(self.u_coeffs)}
        if self.v_indices is not None:
            out["v_indices"] = list(self.v_indices)
            out["v_coeffs"] = list(self.v_coeffs)
        return out


@dataclass
class SearchPart:
    """Outcome of one deviation search (norm or cross)."""

    value: float
    witness: DeviationWitness | None
    samples: int      # objective evaluations spent
    visited: int      # supports or pairs examined
    total: int | None  # combinatorial total in exhaustive mode
    exhaustive: bool
    families: dict | None = None  # cross search: pairs per sampling family


def _ascend_sphere(bsub, nu, z0, direction, steps):
    """Hill-climb direction * ((1/M)||B z||_1 - nu) over the unit sphere."""
    m = bsub.shape[0]
    z = z0 / math.sqrt(float(z0 @ z0))
    val = float(np.sum(np.abs(bsub @ z))) / m - nu
    eta = 0.5
    evals = 1
    for _ in range(steps):
        grad = direction * (bsub.T @ np.sign(bsub @ z)) / m
        grad -= (grad @ z) * z
        gnorm = math.sqrt(float(grad @ grad))
        if gnorm < 1e-14:
            break
        cand = z + (eta / gnorm) * grad
        cand /= math.sqrt(float(cand @ cand))
        cval = float(np.sum(np.abs(bsub @ cand))) / m - nu
        evals += 1
        if direction * cval > direction * val:
            z, val = cand, cval
            eta = min(eta * 1.3, 1.0)
        else:
            eta *= 0.5
            if eta < 1e-9:
                break
    return z, abs(val), evals


def _norm_search_chunk(phi, supports, starts, steps, nu, stream):
    """supports: iterable of index arrays; sampled-mode callers pass a
    lazy generator over the same stream, so support draws interleave
    with the ascent starts and a larger budget extends a smaller one's
    sample sequence."""
    best_val = -1.0
    best = None
    evals = 0
    visited = 0
    for support in supports:
        sup = np.asarray(support, dtype=np.int64)
        bsub = phi[:, sup]
        visited += 1
        for _ in range(starts):
            z0 = stream.normal(sup.size)
            if float(z0 @ z0) < 1e-24:
                z0 = np.ones(sup.size)
            for direction in (1.0, -1.0):
                z, val, used = _ascend_sphere(bsub, nu, z0, direction, steps)
                evals += used
                if val > best_val:
                    best_val = val
                    best = (sup.copy(), z.copy())
    return best_val, best, evals, visited


def estimate_norm_deviation(phi, k: int, budget: SearchBudget, rng: RngSpec,
                            workers: int = 1) -> SearchPart:
    """Lower bound on the worst norm deviation over vectors with at
    most 2k nonzeros, by support enumeration (when the count fits the
    budget cap) or sampled supports, with multi-start sphere ascent."""
    phi = core.as_matrix(phi, "phi")
    m, n = phi.shape
    k = int(k)
    if not 1 <= k or 2 * k > n:
        raise ValueError(f"need 1 <= 2k <= n, got k={k}, n={n}")
    nu = half_normal_mean()
    width = 2 * k
    total = math.comb(n, width)
    engaged = budget.starts >= 1 and budget.num_supports >= 1
    exhaustive = engaged and total <= budget.exhaustive_cap

    if not engaged:
        return SearchPart(0.0, None, 0, 0, total, False)

    chunks = []
    workers = max(1, int(workers))
    if exhaustive:
        all_supports = list(itertools.combinations(range(n), width))
        size = (len(all_supports) + workers - 1) // workers
        for w in range(workers):
            chunk = all_supports[w * size:(w + 1) * size]
            if chunk:
                chunks.append((chunk, Stream(rng.child(w))))
    else:
        per = [budget.num_supports // workers] * workers
        for i in range(budget.num_supports % workers):
            per[i] += 1

        def sampled(stream, count):
            for _ in range(count):
                yield stream.subset(n, width)

        for w, count in enumerate(per):
            if count:
                stream = Stream(rng.child(w))
                chunks.append((sampled(stream, count), stream))

    def run(args):
        chunk, stream = args
        return _norm_search_chunk(phi, chunk, budget.starts, budget.steps, nu, stream)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, chunks))
    else:
        outcomes = [run(c) for c in chunks]

    best_val, best, evals, visited = -1.0, None, 0, 0
    for val, cand, used, seen in outcomes:
        evals += used
        visited += seen
        if val > best_val:
            best_val, best = val, cand
    witness = None
    value = 0.0
    if best is not None:
        sup, z = best
        u = core.embed(z, sup, n)
        value = l1_norm_deviation(phi, u)  # re-evaluate through the public path
        witness = DeviationWitness(value=value,
                                   u_indices=[int(i) for i in sup],
                                   u_coeffs=[float(c) for c in z])
    return SearchPart(value, witness, evals, visited, total,
                      exhaustive and visited == total)


def _best_cross_for_u(phi, su, zu, sv, u_embedded):
    """Closed-form best unit v on support sv orthogonal to u (fixed u):
    project (phi_sv^T sign(phi u)) orthogonally to u restricted to sv."""
    m = phi.shape[0]
    signs = core.sign_vec(phi[:, su] @ zu)
    c = phi[:, sv].T @ signs
    a = u_embedded[sv]
    a_sq = float(a @ a)
    if a_sq > 0.0:
        c = c - (float(c @ a) / a_sq) * a
        c = c - (float(c @ a) / a_sq) * a  # second pass kills rounding residue
    c_norm = math.sqrt(float(c @ c))
    if c_norm < 1e-14:
        return 0.0, None
    return c_norm / m, c / c_norm


def _cross_search_chunk(phi, pairs, starts, steps, stream):
    """pairs: iterable of (S_u, S_v, family) triples; sampled-mode
    callers pass a lazy generator over the same stream (see
    _norm_search_chunk for why)."""
    n = phi.shape[1]
    best_val = -1.0
    best = None
    evals = 0
    visited = 0
    families = {"disjoint": 0, "overlap": 0}
    for su, sv, family in pairs:
        su = np.asarray(su, dtype=np.int64)
        sv = np.asarray(sv, dtype=np.int64)
        visited += 1
        families[family] += 1
        for _ in range(starts):
            zu = stream.normal(su.size)
            zn = math.sqrt(float(zu @ zu))
            zu = zu / zn if zn > 1e-12 else np.ones(su.size) / math.sqrt(su.size)
            u_emb = core.embed(zu, su, n)
            val, zv = _best_cross_for_u(phi, su, zu, sv, u_emb)
            evals += 1
            eta = 0.5
            for _ in range(steps):
                cand = zu + eta * stream.normal(su.size)
                cand /= math.sqrt(float(cand @ cand))
                cand_emb = core.embed(cand, su, n)
                cval, czv = _best_cross_for_u(phi, su, cand, sv, cand_emb)
                evals += 1
                if cval > val:
                    zu, val, zv, u_emb = cand, cval, czv, cand_emb
                    eta = min(eta * 1.3, 1.0)
                else:
                    eta *= 0.5
                    if eta < 1e-9:
                        break
            if zv is not None and val > best_val:
                best_val = val
                best = (su.copy(), zu.copy(), sv.copy(), zv.copy())
    return best_val, best, evals, visited, families


def _sample_pair(stream, n, k, overlap_share, disjoint_ok):
    """Draw one (S_u, S_v) support pair; returns (pair, family)."""
    use_overlap = not disjoint_ok or float(stream.uniform(1)[0]) < overlap_share
    su = stream.subset(n, 2 * k)
    if not use_overlap:
        comp = core.complement_support(su, n)
        sv = comp[stream.subset(n - 2 * k, k)]
        return (su, sv), "disjoint"
    o = 1 + stream.integer_below(k)
    inside = su[stream.subset(2 * k, o)]
    if k - o > 0:
        comp = core.complement_support(su, n)
        outside = comp[stream.subset(n - 2 * k, k - o)]
        sv = core.support_union(inside, outside)
    else:
        sv = inside
    return (su, sv), "overlap"


def estimate_cross_deviation(phi, k: int, budget: SearchBudget, rng: RngSpec,
                             workers: int = 1) -> SearchPart:
    """Lower bound on the worst sign-correlation deviation over
    orthogonal pairs (u with <= 2k nonzeros, v with <= k nonzeros).

    Pairs come from two families: disjoint supports (orthogonal by
    construction; enumerated exactly in exhaustive mode) and overlapping
    supports with v projected onto the orthogonal complement of u inside
    its own support.  The family mix is recorded in the result.
    """
    phi = core.as_matrix(phi, "phi")
    m, n = phi.shape
    k = int(k)
    if not 1 <= k or 2 * k > n:
        raise ValueError(f"need 1 <= 2k <= n, got k={k}, n={n}")
    disjoint_ok = 3 * k <= n
    if not disjoint_ok and budget.overlap_share <= 0.0:
        raise ValueError(
            f"no orthogonal pair family available: 3k = {3 * k} exceeds n = {n} "
            "and overlapping pairs are disabled")
    total = math.comb(n, 2 * k) * math.comb(n - 2 * k, k) if disjoint_ok else None
    engaged = budget.starts >= 1 and budget.num_pairs >= 1
    exhaustive = (engaged and disjoint_ok and total is not None
                  and total <= budget.exhaustive_cap)

    if not engaged:
        return SearchPart(0.0, None, 0, 0, total, False,
                          {"disjoint": 0, "overlap": 0})

    workers = max(1, int(workers))
    chunks = []
    if exhaustive:
        pairs = []
        for su in itertools.combinations(range(n), 2 * k):
            su_arr = np.asarray(su, dtype=np.int64)
            comp = core.complement_support(su_arr, n)
            for sv in itertools.combinations(comp.tolist(), k):
                pairs.append((su_arr, np.asarray(sv, dtype=np.int64), "disjoint"))
        size = (len(pairs) + workers - 1) // workers
        for w in range(workers):
            chunk = pairs[w * size:(w + 1) * size]
            if chunk:
                chunks.append((chunk, Stream(rng.child(w))))
    else:
        per = [budget.num_pairs // workers] * workers
        for i in range(budget.num_pairs % workers):
            per[i] += 1

        def sampled(stream, count):
            for _ in range(count):
                pair, family = _sample_pair(stream, n, k, budget.overlap_share, disjoint_ok)
                yield pair[0], pair[1], family

        for w, count in enumerate(per):
            if count:
                stream = Stream(rng.child(w))
                chunks.append((sampled(stream, count), stream))

    def run(args):
        chunk, stream = args
        return _cross_search_chunk(phi, chunk, budget.starts, budget.steps, stream)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, chunks))
    else:
        outcomes = [run(c) for c in chunks]

    best_val, best, evals, visited = -1.0, None, 0, 0
    families = {"disjoint": 0, "overlap": 0}
    for val, cand, used, seen, fams in outcomes:
        evals += used
        visited += seen
        for key, count in fams.items():
            families[key] += count
        if val > best_val:
            best_val, best = val, cand
    witness = None
    value = 0.0
    if best is not None:
        su, zu, sv, zv = best
        u = core.embed(zu, su, n)
        v = core.embed(zv, sv, n)
        value = sign_cross_deviation(phi, u, v)
        witness = DeviationWitness(value=value,
                                   u_indices=[int(i) for i in su],
                                   u_coeffs=[float(c) for c in zu],
                                   v_indices=[int(i) for i in sv],
                                   v_coeffs=[float(c) for c in zv])
    return SearchPart(value, witness, evals, visited, total,
                      exhaustive and (total is not None and visited == total),
                      families)


@dataclass
class ConditionEstimate:
    """Empirical lower bounds for the two deviation constants at
    sparsity k, with witnesses and search provenance."""

    calibration: float
    norm_dev_lower: float
    cross_dev_lower: float
    k: int
    samples: int
    refinement: str           # "none" | "local-ascent"
    exhaustive: bool
    norm_part: SearchPart = None
    cross_part: SearchPart = None

    def verify(self, phi, tol: float = 1e-12) -> bool:
        """Re-evaluate the stored witnesses against phi."""
        n = core.as_matrix(phi).shape[1]
        ok = True
        if self.norm_part and self.norm_part.witness:
            w = self.norm_part.witness
            ok &= abs(l1_norm_deviation(phi, w.u_vector(n)) - w.value) <= tol
        if self.cross_part and self.cross_part.witness:
            w = self.cross_part.witness
            ok &= abs(sign_cross_deviation(phi, w.u_vector(n), w.v_vector(n)) - w.value) <= tol
        return bool(ok)

    def as_dict(self) -> dict:
        def part_dict(part):
            if part is None:
                return None
            return {
                "value": part.value,
                "witness": part.witness.as_dict() if part.witness else None,
                "samples": part.samples,
                "visited": part.visited,
                "total": part.total,
                "exhaustive": part.exhaustive,
                "families": part.families,
            }
        return {
            "calibration": self.calibration,
            "norm_dev_lower": self.norm_dev_lower,
            "cross_dev_lower": self.cross_dev_lower,
            "k": self.k,
            "samples": self.samples,
            "refinement": self.refinement,
            "exhaustive": self.exhaustive,
            "norm_search": part_dict(self.norm_part),
            "cross_search": part_dict(self.cross_part),
        }


def estimate_conditions(phi, k: int, budget: SearchBudget, rng: RngSpec,
                        workers: int = 1) -> ConditionEstimate:
    """Run both deviation searches and assemble a ConditionEstimate."""
    norm_part = estimate_norm_deviation(phi, k, budget, rng.child(1), workers)
    cross_part = estimate_cross_deviation(phi, k, budget, rng.child(2), workers)
    refinement = "local-ascent" if budget.engaged() and budget.steps > 0 else "none"
    return ConditionEstimate(
        calibration=half_normal_mean(),
        norm_dev_lower=norm_part.value,
        cross_dev_lower=cross_part.value,
        k=k,
        samples=norm_part.samples + cross_part.samples,
        refinement=refinement,
        exhaustive=norm_part.exhaustive and cross_part.exhaustive,
        norm_part=norm_part,
        cross_part=cross_part,
    )


def condition_verdict(estimate: ConditionEstimate) -> str:
    """Check norm_dev + cross_dev <= calibration - 1/2.

    Lower bounds can refute the condition outright; confirming it
    requires the exhaustive search (and even then the per-support
    maximization is heuristic, which "satisfied" inherits).
    """
    threshold = estimate.calibration - 0.5
    if estimate.norm_dev_lower + estimate.cross_dev_lower > threshold:
        return VERDICT_VIOLATED
    if estimate.exhaustive:
        return VERDICT_SATISFIED
    return VERDICT_INCONCLUSIVE


@dataclass(frozen=True)
class SampleBoundParams:
    """Inputs of the sample-complexity bound; c_sample and c_prob stand
    for the unspecified universal constants and default to placeholder 1."""

    c_sample: float = 1.0
    c_prob: float = 1.0
    delta: float = 1.0
    k: int = 1
    n: int = 1

    def __post_init__(self):
        if self.c_sample <= 0 or self.c_prob <= 0:
            raise ValueError("constants must be positive")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")


def sample_complexity_bound(params: SampleBoundParams) -> int:
    """ceil(C * delta**-6 * K * log(2N/K)) with the natural log."""
    ratio = 2.0 * params.n / params.k
    if ratio <= 1.0:
        raise ValueError(f"need 2n/k > 1, got {ratio}")
    return math.ceil(params.c_sample * params.delta ** -6 * params.k * math.log(ratio))


def concentration_probability(c_prob: float, delta: float, m: int) -> float:
    """1 - 8 exp(-c * delta**2 * M), clamped to [0, 1).

    The clamp below 1 matters once the exponential underflows the
    float64 resolution of 1.
    """
    if c_prob <= 0:
        raise ValueError("c_prob must be positive")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    value = 1.0 - 8.0 * math.exp(-c_prob * delta * delta * m)
    return min(max(0.0, value), math.nextafter(1.0, 0.0))


@dataclass
class ConcentrationReport:
    """Sampled concentration check of the two deviation inequalities."""

    params: dict
    trials: list
    violation_rate_norm: float
    violation_rate_cross: float
    mean_l1_ratio: float
    max_dev_norm: float
    max_dev_cross: float

    def as_dict(self) -> dict:
        return {
            "params": self.params,
            "trials": self.trials,
            "violation_rate_norm": self.violation_rate_norm,
            "violation_rate_cross": self.violation_rate_cross,
            "mean_l1_ratio": self.mean_l1_ratio,
            "max_dev_norm": self.max_dev_norm,
            "max_dev_cross": self.max_dev_cross,
        }


def concentration_check(n: int, m: int, k: int, delta: float, trials: int,
                        rng: RngSpec, samples_per_trial: int = 1000) -> ConcentrationReport:
    """Empirical violation rates of the deviation inequalities at level
    delta, over sampled unit k-sparse vectors and disjoint-support
    orthogonal pairs, with a fresh Gaussian matrix per trial.

    This samples the inequalities; it does not bound the supremum.
    """
    n, m, k = int(n), int(m), int(k)
    if not 1 <= k or 2 * k > n:
        raise ValueError(f"need 1 <= 2k <= n, got k={k}, n={n}")
    if m < 1 or trials < 1 or samples_per_trial < 1:
        raise ValueError("m, trials and samples_per_trial must be positive")
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    nu = half_normal_mean()

    records = []
    total_norm_viol = 0
    total_cross_viol = 0
    ratio_sum = 0.0
    max_dev_norm = 0.0
    max_dev_cross = 0.0
    for t in range(trials):
        tspec = rng.child(t)
        phi = gen_gaussian_matrix(m, n, tspec.child(0))
        su_stream = Stream(tspec.child(1))
        pair_stream = Stream(tspec.child(2))
        norm_viol = 0
        cross_viol = 0
        trial_ratio = 0.0
        for _ in range(samples_per_trial):
            sup = su_stream.subset(n, k)
            z = su_stream.unit_vector(k)
            ratio = float(np.sum(np.abs(phi[:, sup] @ z))) / m
            trial_ratio += ratio
            dev = abs(ratio - nu)
            max_dev_norm = max(max_dev_norm, dev)
            norm_viol += dev > delta

            su = pair_stream.subset(n, k)
            zu = pair_stream.unit_vector(k)
            comp = core.complement_support(su, n)
            sv = comp[pair_stream.subset(n - k, k)]
            zv = pair_stream.unit_vector(k)
            signs = core.sign_vec(phi[:, su] @ zu)
            cross = abs(float(signs @ (phi[:, sv] @ zv))) / m
            max_dev_cross = max(max_dev_cross, cross)
            cross_viol += cross > delta
        total_norm_viol += norm_viol
        total_cross_viol += cross_viol
        ratio_sum += trial_ratio
        records.append({
            "trial": t,
            "violations_norm": int(norm_viol),
            "violations_cross": int(cross_viol),
            "samples": samples_per_trial,
            "mean_l1_ratio": trial_ratio / samples_per_trial,
        })
    total = trials * samples_per_trial
    return ConcentrationReport(
        params={"n": n, "m": m, "k": k, "delta": delta, "trials": trials,
                "samples_per_trial": samples_per_trial, "rng": rng.as_dict()},
        trials=records,
        violation_rate_norm=total_norm_viol / total,
        violation_rate_cross=total_cross_viol / total,
        mean_l1_ratio=ratio_sum / total,
        max_dev_norm=max_dev_norm,
        max_dev_cross=max_dev_cross,
    )
