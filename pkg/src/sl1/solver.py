"""Solvers for the l1-fidelity basis pursuit denoising program

    minimize ||u||_1   subject to   ||y - phi @ u||_1 <= epsilon.

Two routes share one result contract: an exact reduction to a linear
program solved by the built-in simplex method (the reference oracle for
small problems), and a relaxed primal-dual splitting scheme (the
scalable path).  The primal-dual solver certifies optimality through an
explicit duality gap: any q with ||phi.T @ q||_inf <= 1 gives the lower
bound q @ y - epsilon * ||q||_inf on the optimal value, so a feasible
iterate whose objective meets that bound up to tolerance is accepted.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import core, simplex
from .rng import RngSpec, Stream

METHOD_LP = "lp-exact"
METHOD_FIRST_ORDER = "first-order"

STATUS_OPTIMAL = "optimal"
STATUS_FEASIBLE = "feasible-suboptimal"
STATUS_INFEASIBLE = "infeasible-detected"
STATUS_ITER_LIMIT = "iteration-limit"

# Fixed stream for internal randomized linear algebra (power iteration);
# keeps every solve a pure function of its arguments.
_INTERNAL_RNG = RngSpec(0x51F1, 0)


@dataclass
class SolverConfig:
    method: str = METHOD_FIRST_ORDER
    feasibility_tol: float = 1e-8   # absolute slack allowed on ||y - phi u||_1 - epsilon
    objective_tol: float = 1e-7    # relative: duality gap / objective stall
    max_iters: int = 50_000
    step_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.feasibility_tol <= 0 or self.objective_tol <= 0:
            raise ValueError("tolerances must be strictly positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.method not in (METHOD_LP, METHOD_FIRST_ORDER):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class SolverResult:
    u_star: np.ndarray
    objective: float
    residual_l1: float
    status: str
    iters: int
    certificate: dict | None = None

    def is_usable(self) -> bool:
        return self.status in (STATUS_OPTIMAL, STATUS_FEASIBLE)

    def to_json_dict(self) -> dict:
        out = {
            "objective": self.objective,
            "residual_l1": self.residual_l1,
            "status": self.status,
            "iters": self.iters,
            "u_star": [float(v) for v in self.u_star],
        }
        if self.certificate is not None:
            out["certificate"] = self.certificate
        return out

    @classmethod
    def from_json_dict(cls, d: dict) -> "SolverResult":
        return cls(
            u_star=np.asarray(d["u_star"], dtype=np.float64),
            objective=float(d["objective"]),
            residual_l1=float(d["residual_l1"]),
            status=str(d["status"]),
            iters=int(d["iters"]),
            certificate=d.get("certificate"),
        )


def residual_l1(phi, y, u) -> float:
    return float(np.sum(np.abs(y - phi @ u)))


def soft_threshold(v, tau: float) -> np.ndarray:
    """Componentwise sign(v) * max(|v| - tau, 0) with the mathematical
    sign (0 maps to 0), i.e. the prox of tau * ||.||_1."""
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def project_l1_ball(v, radius: float) -> np.ndarray:
    """Euclidean projection onto {z : ||z||_1 <= radius} via the
    sort-based threshold search."""
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    v = np.asarray(v, dtype=np.float64)
    if radius == 0.0:
        return np.zeros_like(v)
    mags = np.abs(v)
    if mags.sum() <= radius:
        return v.copy()
    dropped = np.sort(mags)[::-1]
    cumulative = np.cumsum(dropped) - radius
    counts = np.arange(1, v.size + 1)
    candidates = dropped - cumulative / counts
    rho = int(np.nonzero(candidates > 0)[0].max())
    theta = cumulative[rho] / (rho + 1.0)
    return np.sign(v) * np.maximum(mags - theta, 0.0)


def operator_norm_estimate(phi, iters: int = 100, rng: RngSpec = None) -> float:
    """Power-iteration lower bound on the spectral norm ||phi||_2."""
    phi = core.as_matrix(phi, "phi")
    if iters < 1:
        raise ValueError(f"iters must be positive, got {iters}")
    b = Stream(rng if rng is not None else _INTERNAL_RNG).unit_vector(phi.shape[1])
    estimate = 0.0
    for _ in range(int(iters)):
        z = phi.T @ (phi @ b)
        norm = float(np.sqrt(z @ z))
        if norm <= 0.0:
            return 0.0
        b = z / norm
        previous, estimate = estimate, float(np.sqrt(np.sum((phi @ b) ** 2)))
        if abs(estimate - previous) <= 1e-13 * max(estimate, 1.0):
            break
    return estimate


@dataclass
class LpProblem:
    """BPDN-l1 rewritten as the canonical LP

        minimize sum(u+) + sum(u-)
        s.t.  phi (u+ - u-) + t >= y,  -phi (u+ - u-) + t >= -y,
              sum(t) <= epsilon,  u+, u-, t >= 0,

    stored in '<=' form over the stacked variable z = (u+, u-, t).
    """

    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    phi: np.ndarray
    y: np.ndarray
    epsilon: float

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def num_rows(self) -> int:
        return self.b_ub.size

    def signal_from(self, z) -> np.ndarray:
        n = self.phi.shape[1]
        return np.asarray(z[:n]) - np.asarray(z[n:2 * n])


def lp_formulate(phi, y, epsilon: float) -> LpProblem:
    phi = core.as_matrix(phi, "phi")
    y = core.as_vector(y, "y")
    m, n = phi.shape
    if y.size != m:
        raise ValueError(f"phi is {m}x{n} but y has length {y.size}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    eye = np.eye(m)
    a_ub = np.zeros((2 * m + 1, 2 * n + m))
    a_ub[:m, :n] = -phi
    a_ub[:m, n:2 * n] = phi
    a_ub[:m, 2 * n:] = -eye
    a_ub[m:2 * m, :n] = phi
    a_ub[m:2 * m, n:2 * n] = -phi
    a_ub[m:2 * m, 2 * n:] = -eye
    a_ub[2 * m, 2 * n:] = 1.0
    b_ub = np.concatenate([-y, y, [float(epsilon)]])
    c = np.concatenate([np.ones(2 * n), np.zeros(m)])
    return LpProblem(c=c, a_ub=a_ub, b_ub=b_ub, phi=phi, y=y, epsilon=float(epsilon))


def solve_lp_exact(lp: LpProblem, config: SolverConfig = None) -> SolverResult:
    """Exact solve of the LP reduction with the built-in simplex method."""
    cfg = config if config is not None else SolverConfig(method=METHOD_LP)
    res = simplex.solve_canonical(lp.c, lp.a_ub, lp.b_ub, max_pivots=cfg.max_iters * 10)
    if res.status == simplex.INFEASIBLE:
        return SolverResult(
            u_star=np.zeros(lp.phi.shape[1]), objective=math.inf, residual_l1=math.inf,
            status=STATUS_INFEASIBLE, iters=res.pivots, certificate=None)
    if res.status == simplex.UNBOUNDED:
        raise ValueError("LP reduction is unbounded; the problem data is malformed")
    if res.x is None:  # pivot limit before any feasible basis existed
        return SolverResult(
            u_star=np.zeros(lp.phi.shape[1]), objective=math.inf, residual_l1=math.inf,
            status=STATUS_ITER_LIMIT, iters=res.pivots, certificate=None)
    u = lp.signal_from(res.x)
    certificate = None
    if res.duals is not None:
        dual_obj = float(lp.b_ub @ res.duals)
        certificate = {
            "duals": [float(v) for v in res.duals],
            "dual_objective": dual_obj,
            "strong_duality_gap": float(res.objective - dual_obj),
        }
    status = STATUS_OPTIMAL if res.status == simplex.OPTIMAL else STATUS_FEASIBLE
    return SolverResult(
        u_star=u,
        objective=core.norm_lp(u, 1),
        residual_l1=residual_l1(lp.phi, lp.y, u),
        status=status,
        iters=res.pivots,
        certificate=certificate,
    )


def _dual_lower_bound(q, phit_q, y, epsilon) -> float:
    """Lower bound on the optimum from an arbitrary dual vector q."""
    scale = float(np.max(np.abs(phit_q))) * (1.0 + 1e-12)
    scale = max(1.0, scale)
    return (abs(float(q @ y)) - epsilon * float(np.max(np.abs(q)))) / scale


class _FeasibilityPolish:
    """Turn a nearly feasible iterate into a feasible candidate.

    The residual r = y - phi u is pulled to its l1-ball projection r'
    and the iterate is corrected through the least-norm (m <= n) or
    least-squares (m > n) solution of phi du = r - r'.  Near the
    optimum the correction cost is of the order of the feasibility
    violation, which lets the duality-gap test certify iterates that
    merely graze the constraint boundary.
    """

    def __init__(self, phi):
        self.phi = phi
        self.wide = phi.shape[0] <= phi.shape[1]
        gram = phi @ phi.T if self.wide else phi.T @ phi
        ridge = 1e-12 * float(np.trace(gram)) / gram.shape[0]
        self.gram = gram + ridge * np.eye(gram.shape[0])

    def candidate(self, u, r, epsilon):
        shift = r - project_l1_ball(r, epsilon * (1.0 - 1e-9))
        try:
            if self.wide:
                du = self.phi.T @ np.linalg.solve(self.gram, shift)
            else:
                du = np.linalg.solve(self.gram, self.phi.T @ shift)
        except np.linalg.LinAlgError:
            return None
        return u + du


def solve_first_order(phi, y, epsilon: float, config: SolverConfig = None) -> SolverResult:
    """Relaxed primal-dual splitting on ||u||_1 + indicator of the
    residual ball {u : ||y - phi u||_1 <= epsilon}.

    Stops at a certified duality gap below objective_tol (relative), or
    on the fallback rule: feasible and objective stalled over a
    100-iteration window.  Hitting the iteration cap returns status
    "iteration-limit" carrying the best feasible iterate seen, if any.
    """
    phi = core.as_matrix(phi, "phi")
    y = core.as_vector(y, "y")
    epsilon = float(epsilon)
    m, n = phi.shape
    if y.size != m:
        raise ValueError(f"phi is {m}x{n} but y has length {y.size}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    cfg = config if config is not None else SolverConfig()
    ftol, otol = cfg.feasibility_tol, cfg.objective_tol

    y_l1 = core.norm_lp(y, 1)
    if y_l1 <= epsilon:
        # zero is feasible and l1-minimal
        return SolverResult(np.zeros(n), 0.0, y_l1, STATUS_OPTIMAL, 0,
                            {"stop": "zero-feasible"})

    params = dict(cfg.step_params or {})
    norm_iters = int(params.get("norm_iters", 300))
    check_every = max(1, int(params.get("check_every", 10)))
    window = max(check_every, int(params.get("window", 100)))
    relax = float(params.get("relax", 1.8))
    gamma = float(params.get("gamma", 1.0))

    lip = operator_norm_estimate(phi, iters=norm_iters) * 1.02
    if lip <= 0.0:
        # phi is the zero matrix and y is outside the residual ball
        return SolverResult(np.zeros(n), math.inf, y_l1, STATUS_INFEASIBLE, 0, None)
    tau = gamma / lip
    sigma = 1.0 / (gamma * lip)

    u = np.zeros(n)
    q = np.zeros(m)
    u_hat = u
    best_u = None
    best_obj = math.inf
    best_res = math.inf
    obj_trace = []
    history = [] if params.get("record_history") else None
    polish = None
    stop = "cap"
    it = 0

    for it in range(1, cfg.max_iters + 1):
        q_top = q                     # q and phi.T @ q from the same iterate
        phit_q = phi.T @ q_top
        u_hat = soft_threshold(u - tau * phit_q, tau)
        w = q + sigma * (phi @ (2.0 * u_hat - u))
        q_hat = w - sigma * (y + project_l1_ball(w / sigma - y, epsilon))
        u = u + relax * (u_hat - u)
        q = q + relax * (q_hat - q)

        if it % check_every and it != cfg.max_iters:
            continue
        r = y - phi @ u_hat
        res = float(np.sum(np.abs(r)))
        obj = core.norm_lp(u_hat, 1)
        if res <= epsilon + ftol and obj < best_obj:
            best_u = u_hat.copy()
            best_obj = obj
            best_res = res
        elif epsilon < res <= epsilon + 0.5 * (1.0 + epsilon):
            # nearly feasible: snap the residual into the ball and keep
            # the corrected point when it beats the incumbent
            if polish is None:
                polish = _FeasibilityPolish(phi)
            cand = polish.candidate(u_hat, r, epsilon)
            if cand is not None:
                cand_res = residual_l1(phi, y, cand)
                cand_obj = core.norm_lp(cand, 1)
                if cand_res <= epsilon + ftol and cand_obj < best_obj:
                    best_u = cand
                    best_obj = cand_obj
                    best_res = cand_res
        gap = best_obj - _dual_lower_bound(q_top, phit_q, y, epsilon)
        if history is not None:
            history.append({"iter": it, "objective": obj, "residual_l1": res,
                            "best_objective": best_obj if best_u is not None else None,
                            "gap": gap if best_u is not None else None})
        if best_u is not None and gap <= otol * (1.0 + abs(best_obj)):
            stop = "gap"
            break
        obj_trace.append(obj)
        lag = window // check_every
        # A flat objective can sit well away from the optimum, so a
        # stall is only trusted when the duality gap loosely agrees.
        if (len(obj_trace) > lag and res <= epsilon + ftol
                and abs(obj - obj_trace[-1 - lag]) <= otol * (1.0 + abs(obj))
                and gap <= 5.0 * otol * (1.0 + abs(best_obj))):
            stop = "stall"
            break

    if stop == "cap":
        if best_u is not None:
            u_out, obj_out, res_out = best_u, best_obj, best_res
        else:
            u_out = u_hat
            obj_out = core.norm_lp(u_hat, 1)
            res_out = residual_l1(phi, y, u_hat)
        status = STATUS_ITER_LIMIT
    else:
        u_out, obj_out, res_out = best_u, best_obj, best_res
        status = STATUS_OPTIMAL

    certificate = {"stop": stop, "lipschitz_bound": lip}
    if best_u is not None:
        certificate["duality_gap"] = float(best_obj - _dual_lower_bound(q, phi.T @ q, y, epsilon))
    if history is not None:
        certificate["history"] = history
    return SolverResult(u_out, float(obj_out), float(res_out), status, it, certificate)


def solve(phi, y, epsilon: float, config: SolverConfig = None) -> SolverResult:
    """Dispatch on config.method (default: first-order)."""
    cfg = config if config is not None else SolverConfig()
    if cfg.method == METHOD_LP:
        return solve_lp_exact(lp_formulate(phi, y, epsilon), cfg)
    return solve_first_order(phi, y, epsilon, cfg)
