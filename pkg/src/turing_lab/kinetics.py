"""Reaction kinetics, homogeneous steady states and their linearization.

A :class:`ReactionSystem` bundles the two reaction rates ``f(U, V)``,
``g(U, V)`` and the two diffusivities ``D1(U, V)``, ``D2(U, V)``. All four are
plain vectorized callables, so they can be evaluated pointwise on a grid by the
simulator. Built-in models are assembled from module-level functions bound with
:func:`functools.partial` so systems stay picklable for process pools.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigError, DerivativeMismatch, NoConvergence, SingularJacobian

Rate = Callable[[np.ndarray, np.ndarray], np.ndarray]
JacobianFn = Callable[[float, float], tuple[tuple[float, float], tuple[float, float]]]

STEADY_TOL = 1e-12
NEWTON_MAX_ITER = 100
JACOBIAN_RTOL = 1e-5
DEFAULT_ETA = 0.5


@dataclass(frozen=True)
class ReactionSystem:
    """Two-species reaction-diffusion model.

    ``jacobian``, when given, returns the closed-form partials
    ``((f_u, f_v), (g_u, g_v))`` at a point and is used in ``"analytic"``
    derivative mode.
    """

    name: str
    f: Rate
    g: Rate
    D1: Rate
    D2: Rate
    steady_state: tuple[float, float] | None = None
    derivative_mode: str = "numeric"
    jacobian: JacobianFn | None = None
    eta: float = DEFAULT_ETA
    guess: tuple[float, float] = (1.0, 1.0)
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.derivative_mode not in ("analytic", "numeric"):
            raise ConfigError(f"derivative_mode must be 'analytic' or 'numeric', got {self.derivative_mode!r}")
        if self.derivative_mode == "analytic" and self.jacobian is None:
            raise ConfigError(f"model {self.name!r}: analytic mode needs closed-form partials")
        if not self.eta > 0:
            raise ConfigError("validity radius eta must be positive")

    def reaction(self, u, v):
        """Evaluate ``(f, g)`` at ``(U, V)``."""
        return self.f(u, v), self.g(u, v)

    def residual(self, state=None) -> float:
        U, V = self.steady_state if state is None else state
        return float(max(abs(self.f(U, V)), abs(self.g(U, V))))


@dataclass(frozen=True)
class Linearization:
    """Jacobian ``A`` of the kinetics and the diffusivities at the steady state."""

    a11: float
    a12: float
    a21: float
    a22: float
    d1bar: float
    d2bar: float

    @classmethod
    def from_matrix(cls, A, D) -> "Linearization":
        A = np.asarray(A, dtype=float)
        return cls(float(A[0, 0]), float(A[0, 1]), float(A[1, 0]), float(A[1, 1]),
                   float(D[0]), float(D[1]))

    @property
    def A(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def D(self) -> np.ndarray:
        return np.array([self.d1bar, self.d2bar])

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    def with_diffusion(self, d1bar: float, d2bar: float) -> "Linearization":
        return dataclasses.replace(self, d1bar=d1bar, d2bar=d2bar)


# --------------------------------------------------------------------------
# derivatives and Newton


def _step(x: float) -> float:
    return max(1e-6, 1e-6 * abs(x))


def numeric_jacobian(system: ReactionSystem, U: float, V: float) -> np.ndarray:
    """Central-difference partials of ``(f, g)`` at ``(U, V)``."""
    hu, hv = _step(U), _step(V)
    J = np.empty((2, 2))
    for row, fn in enumerate((system.f, system.g)):
        J[row, 0] = (fn(U + hu, V) - fn(U - hu, V)) / (2 * hu)
        J[row, 1] = (fn(U, V + hv) - fn(U, V - hv)) / (2 * hv)
    return J


def _jacobian(system: ReactionSystem, U: float, V: float) -> np.ndarray:
    if system.jacobian is not None and system.derivative_mode == "analytic":
        return np.asarray(system.jacobian(U, V), dtype=float)
    return numeric_jacobian(system, U, V)


def find_steady_state(system: ReactionSystem, guess=None, *, tol: float = STEADY_TOL,
                      max_iter: int = NEWTON_MAX_ITER) -> tuple[float, float]:
    """Locate a homogeneous steady state by damped Newton iteration.

    Each Newton step is halved until the max-norm residual decreases.

    Raises
    ------
    SingularJacobian
        The Newton matrix is numerically singular.
    NoConvergence
        The residual did not reach ``tol`` within ``max_iter`` iterations.
    """
    x = np.array(system.guess if guess is None else guess, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NoConvergence(f"non-finite guess {x}")

    def F(z):
        return np.array([system.f(z[0], z[1]), system.g(z[0], z[1])], dtype=float)

    r = F(x)
    res = np.max(np.abs(r))
    for _ in range(max_iter):
        if not np.isfinite(res):
            raise NoConvergence(f"{system.name}: kinetics not finite at {x}")
        if res <= tol:
            return float(x[0]), float(x[1])
        J = _jacobian(system, x[0], x[1])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if not np.isfinite(det) or abs(det) <= 1e-14 * max(np.max(np.abs(J)) ** 2, 1e-300):
            raise SingularJacobian(f"{system.name}: singular Newton matrix at {x}")
        dx = np.linalg.solve(J, -r)
        alpha = 1.0
        for _ in range(40):
            x_new = x + alpha * dx
            r_new = F(x_new)
            res_new = np.max(np.abs(r_new))
            if np.isfinite(res_new) and res_new < res:
                break
            alpha *= 0.5
        else:
            raise NoConvergence(f"{system.name}: line search stalled at {x}, residual {res:.3e}")
        x, r, res = x_new, r_new, res_new
    if res <= tol:
        return float(x[0]), float(x[1])
    raise NoConvergence(f"{system.name}: residual {res:.3e} after {max_iter} iterations")


def with_steady_state(system: ReactionSystem, guess=None) -> ReactionSystem:
    """Return a copy of ``system`` whose steady state has been solved for."""
    return dataclasses.replace(system, steady_state=find_steady_state(system, guess))


def linearize(system: ReactionSystem) -> Linearization:
    """Jacobian of the kinetics and diffusivities at the steady state.

    In analytic mode the supplied partials are cross-checked against central
    differences; entries are compared relative to ``max(|entry|, max|J|)`` so
    that structurally zero partials do not trip the check.
    """
    if system.steady_state is None:
        system = with_steady_state(system)
    U, V = system.steady_state
    res = system.residual()
    if not res <= STEADY_TOL:
        raise ConfigError(f"{system.name}: ({U}, {V}) is not a steady state (residual {res:.3e})")

    numeric = numeric_jacobian(system, U, V)
    if system.derivative_mode == "analytic":
        J = np.asarray(system.jacobian(U, V), dtype=float)
        scale = np.maximum(np.abs(J), np.max(np.abs(J)))
        bad = np.abs(J - numeric) > JACOBIAN_RTOL * np.maximum(scale, 1e-300)
        if np.any(bad):
            raise DerivativeMismatch(f"{system.name}: analytic partials {J.tolist()} "
                                     f"disagree with central differences {numeric.tolist()}")
    else:
        J = numeric

    d1, d2 = float(system.D1(U, V)), float(system.D2(U, V))
    if not (d1 > 0 and d2 > 0):
        raise ConfigError(f"{system.name}: diffusivities must be positive at the steady state, got {d1}, {d2}")
    return Linearization(float(J[0, 0]), float(J[0, 1]), float(J[1, 0]), float(J[1, 1]), d1, d2)


# --------------------------------------------------------------------------
# built-in models


def _const(c, u, v):
    return c + 0.0 * u


def _lin_f(a11, a12, cubic, u, v):
    return a11 * u + a12 * v - cubic * u ** 3


def _lin_g(a21, a22, u, v):
    return a21 * u + a22 * v


def _lin_jac(a11, a12, a21, a22, cubic, u, v):
    return ((a11 - 3 * cubic * u ** 2, a12), (a21, a22))


def _schnak_f(a, u, v):
    return a - u + u * u * v


def _schnak_g(b, u, v):
    return b - u * u * v


def _schnak_jac(u, v):
    return ((-1 + 2 * u * v, u * u), (-2 * u * v, -u * u))


def _gm_f(a, b, u, v):
    return a - b * u + u * u / v


def _gm_g(u, v):
    return u * u - v


def _gm_jac(b, u, v):
    return ((-b + 2 * u / v, -u * u / (v * v)), (2 * u, -1.0))


def _bruss_f(a, b, u, v):
    return a - (b + 1) * u + u * u * v


def _bruss_g(b, u, v):
    return b * u - u * u * v


def _bruss_jac(b, u, v):
    return ((-(b + 1) + 2 * u * v, u * u), (b - 2 * u * v, -u * u))


def benchmark(a11=1.0, a12=-2.0, a21=3.0, a22=-4.0, D1=0.5, D2=20.0, cubic=0.0,
              eta=DEFAULT_ETA, derivative_mode="analytic") -> ReactionSystem:
    """Linear benchmark ``f = a11 U + a12 V - cubic U^3``, ``g = a21 U + a22 V``."""
    return ReactionSystem(
        name="benchmark" if cubic == 0 else "benchmark_cubic",
        f=partial(_lin_f, a11, a12, cubic), g=partial(_lin_g, a21, a22),
        D1=partial(_const, D1), D2=partial(_const, D2),
        steady_state=(0.0, 0.0), guess=(0.0, 0.0),
        derivative_mode=derivative_mode, jacobian=partial(_lin_jac, a11, a12, a21, a22, cubic),
        eta=eta, params=dict(a11=a11, a12=a12, a21=a21, a22=a22, D1=D1, D2=D2, cubic=cubic),
    )


def benchmark_cubic(cubic=1.0, **kw) -> ReactionSystem:
    return benchmark(cubic=cubic, **kw)


def schnakenberg(a=0.1, b=0.9, D1=1.0, D2=40.0, eta=DEFAULT_ETA, derivative_mode="analytic") -> ReactionSystem:
    return ReactionSystem(
        name="schnakenberg", f=partial(_schnak_f, a), g=partial(_schnak_g, b),
        D1=partial(_const, D1), D2=partial(_const, D2), guess=(1.0, 1.0),
        derivative_mode=derivative_mode, jacobian=_schnak_jac, eta=eta,
        params=dict(a=a, b=b, D1=D1, D2=D2),
    )


def gierer_meinhardt(a=0.1, b=1.0, D1=1.0, D2=30.0, eta=DEFAULT_ETA, derivative_mode="analytic") -> ReactionSystem:
    u0 = (a + 1) / b
    return ReactionSystem(
        name="gierer_meinhardt", f=partial(_gm_f, a, b), g=_gm_g,
        D1=partial(_const, D1), D2=partial(_const, D2), guess=(u0, u0 * u0),
        derivative_mode=derivative_mode, jacobian=partial(_gm_jac, b), eta=eta,
        params=dict(a=a, b=b, D1=D1, D2=D2),
    )


def brusselator(a=4.5, b=7.5, D1=2.8, D2=22.4, eta=DEFAULT_ETA, derivative_mode="analytic") -> ReactionSystem:
    return ReactionSystem(
        name="brusselator", f=partial(_bruss_f, a, b), g=partial(_bruss_g, b),
        D1=partial(_const, D1), D2=partial(_const, D2), guess=(a, b / a),
        derivative_mode=derivative_mode, jacobian=partial(_bruss_jac, b), eta=eta,
        params=dict(a=a, b=b, D1=D1, D2=D2),
    )


BUILTIN_MODELS: dict[str, Callable[..., ReactionSystem]] = {
    "benchmark": benchmark,
    "benchmark_cubic": benchmark_cubic,
    "schnakenberg": schnakenberg,
    "gierer_meinhardt": gierer_meinhardt,
    "brusselator": brusselator,
}


class ExpressionFunction:
    """Picklable vectorized function compiled from a sympy expression string."""

    def __init__(self, expr: str, params: Mapping[str, float]):
        self.expr = expr
        self.params = dict(params)
        self._compile()

    def _compile(self):
        import sympy as sp

        U, V = sp.symbols("U V")
        local = {k: sp.Float(v) for k, v in self.params.items()}
        local.update(U=U, V=V)
        try:
            self.sym = sp.sympify(self.expr, locals=local)
        except (sp.SympifyError, TypeError, SyntaxError) as exc:
            raise ConfigError(f"cannot parse expression {self.expr!r}: {exc}") from None
        extra = self.sym.free_symbols - {U, V}
        if extra:
            raise ConfigError(f"expression {self.expr!r} has unknown symbols {sorted(map(str, extra))}")
        self._fn = sp.lambdify((U, V), self.sym, "numpy")
        self._du = sp.lambdify((U, V), sp.diff(self.sym, U), "numpy")
        self._dv = sp.lambdify((U, V), sp.diff(self.sym, V), "numpy")

    def __call__(self, u, v):
        return self._fn(u, v) + 0.0 * u

    def partials(self, u, v):
        return float(self._du(u, v)), float(self._dv(u, v))

    def __getstate__(self):
        return {"expr": self.expr, "params": self.params}

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._compile()


class _ExpressionJacobian:
    def __init__(self, f: ExpressionFunction, g: ExpressionFunction):
        self.f, self.g = f, g

    def __call__(self, u, v):
        return self.f.partials(u, v), self.g.partials(u, v)


def expression_model(name: str, f: str, g: str, D1: str | float, D2: str | float,
                     params: Mapping[str, float] | None = None, guess=(1.0, 1.0),
                     derivative_mode="analytic", eta=DEFAULT_ETA) -> ReactionSystem:
    """User-configured model from expression strings in ``U``, ``V`` and named parameters."""
    params = dict(params or {})
    ff, gg = ExpressionFunction(f, params), ExpressionFunction(g, params)
    return ReactionSystem(
        name=name, f=ff, g=gg,
        D1=ExpressionFunction(str(D1), params), D2=ExpressionFunction(str(D2), params),
        guess=tuple(float(x) for x in guess), derivative_mode=derivative_mode,
        jacobian=_ExpressionJacobian(ff, gg), eta=eta, params=params,
    )


def build_model(name: str, params: Mapping[str, float] | None = None, *, guess=None,
                derivative_mode: str | None = None, eta: float | None = None,
                solve: bool = True) -> ReactionSystem:
    """Instantiate a built-in model by name and (optionally) solve its steady state."""
    if name not in BUILTIN_MODELS:
        raise ConfigError(f"unknown model {name!r}; built-ins are {sorted(BUILTIN_MODELS)}")
    kw = dict(params or {})
    if derivative_mode is not None:
        kw["derivative_mode"] = derivative_mode
    if eta is not None:
        kw["eta"] = eta
    try:
        system = BUILTIN_MODELS[name](**kw)
    except TypeError as exc:
        raise ConfigError(f"model {name!r}: {exc}") from None
    if guess is not None:
        system = dataclasses.replace(system, guess=tuple(float(x) for x in guess), steady_state=None)
    if solve and (system.steady_state is None or system.residual() > STEADY_TOL):
        system = with_steady_state(system)
    return system

