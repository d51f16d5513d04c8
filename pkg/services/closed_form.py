"""Closed-form fields: bubbles, the rigged family, and the two symmetries.

Fields are immutable descriptors evaluated at arbitrary points. Each carries
an optional far-field tail: for `tail_of == "exp"` the tail describes e^{u},
for `tail_of == "field"` it describes the field itself.
"""
import math
from abc import abstractmethod
from typing import Literal, NamedTuple, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.special import logsumexp

from core.exceptions import ConfigError
from core.logger import get_logger
from schemas.bubble import BubbleParams, ExponentRelations, RadialTail
from utils.validators import as_point

logger = get_logger(__name__)

MAX_DEPTH = 8
LOG8 = math.log(8.0)


def bubble_constant(mu: float) -> float:
    #(4(2 - mu)/pi)^{2/(4 - mu)}, the prefactor of e^{U}
    return (4.0 * (2.0 - mu) / math.pi) ** (2.0 / (4.0 - mu))


def nonlocal_energy(mu: float) -> float:
    """Integral of e^{U} over the plane: (4(2 - mu))^{2/(4 - mu)} pi^{(2 - mu)/(4 - mu)}."""
    return (4.0 * (2.0 - mu)) ** (2.0 / (4.0 - mu)) * math.pi ** ((2.0 - mu) / (4.0 - mu))


class ClosedFormField(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: str
    depth: int = 0

    @abstractmethod
    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        ...

    def __call__(self, x, y):
        return self.evaluate(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def at(self, point: Sequence[float]) -> float:
        return float(self(point[0], point[1]))

    @property
    def tail(self) -> Optional[RadialTail]:
        return None

    @property
    def tail_of(self) -> Optional[Literal["exp", "field"]]:
        return None

    def exp_tail(self, power: float = 1.0) -> Optional[RadialTail]:
        #tail of e^{power * u}, when e^{u} has one
        if self.tail is None or self.tail_of != "exp":
            return None
        return self.tail.power(power)


def _r2(x, y, x0):
    return (x - x0[0]) ** 2 + (y - x0[1]) ** 2


class LocalBubble(ClosedFormField):
    """U_0(delta (x - x0)) + 2 log delta with U_0 = log 8/(1 + |x|^2)^2."""
    kind: Literal["local_bubble"] = "local_bubble"
    x0: tuple[float, float] = (0.0, 0.0)
    delta: float = Field(1.0, gt=0)

    @field_validator('x0', mode='before')
    def validate_x0(cls, v):
        return as_point(v)

    def evaluate(self, x, y):
        return LOG8 - 2.0 * np.log1p(self.delta ** 2 * _r2(x, y, self.x0)) + 2.0 * math.log(self.delta)

    @property
    def tail(self):
        return RadialTail(center=self.x0, coeff=8.0 / self.delta ** 2, beta=1.0 / self.delta ** 2, s=2.0)

    @property
    def tail_of(self):
        return "exp"


class NonlocalBubble(ClosedFormField):
    """-2 log(1 + delta^2 |x - x0|^2) + (2/(4 - mu)) log(4(2 - mu)/pi) + 2 log delta."""
    kind: Literal["nonlocal_bubble", "rigged_u"] = "nonlocal_bubble"
    params: BubbleParams

    @property
    def mu(self) -> float:
        return self.params.mu

    @property
    def lam(self) -> float:
        return self.params.lam

    @property
    def offset(self) -> float:
        return (2.0 / (4.0 - self.mu)) * math.log(4.0 * (2.0 - self.mu) / math.pi)

    def evaluate(self, x, y):
        p = self.params
        return -2.0 * np.log1p(p.delta ** 2 * _r2(x, y, p.x0)) + self.offset + 2.0 * math.log(p.delta)

    @property
    def tail(self):
        p = self.params
        return RadialTail(center=p.x0, coeff=bubble_constant(p.mu) / p.delta ** 2, beta=1.0 / p.delta ** 2, s=2.0)

    @property
    def tail_of(self):
        return "exp"


class RiggedU(NonlocalBubble):
    """u_k = 2 log(A k/(1 + k^2 |x|^2)), which is the nonlocal bubble at scale k."""
    kind: Literal["rigged_u"] = "rigged_u"
    k: int = Field(..., ge=1)


class RiggedF(ClosedFormField):
    """F_k = 8 k^2/(1 + k^2 |x|^2)^2 = -Delta u_k."""
    kind: Literal["rigged_F"] = "rigged_F"
    k: int = Field(..., ge=1)

    def evaluate(self, x, y):
        k2 = float(self.k) ** 2
        return 8.0 * k2 / (1.0 + k2 * _r2(x, y, (0.0, 0.0))) ** 2

    @property
    def tail(self):
        k2 = float(self.k) ** 2
        return RadialTail(center=(0.0, 0.0), coeff=8.0 / k2, beta=1.0 / k2, s=2.0)

    @property
    def tail_of(self):
        return "field"


class RadialPower(ClosedFormField):
    """c |x - x0|^a."""
    kind: Literal["radial_power"] = "radial_power"
    c: float
    a: float
    x0: tuple[float, float] = (0.0, 0.0)

    @field_validator('x0', mode='before')
    def validate_x0(cls, v):
        return as_point(v)

    def evaluate(self, x, y):
        with np.errstate(divide='ignore'):
            return self.c * _r2(x, y, self.x0) ** (0.5 * self.a)

    @property
    def tail(self):
        if self.a >= 0 or self.c <= 0:
            return None
        return RadialTail(center=self.x0, coeff=self.c, beta=0.0, s=-0.5 * self.a)

    @property
    def tail_of(self):
        return "field" if self.tail is not None else None


class Constant(ClosedFormField):
    kind: Literal["constant"] = "constant"
    c: float

    def evaluate(self, x, y):
        return np.full(np.broadcast(x, y).shape, self.c)


class Rescaled(ClosedFormField):
    """x -> base(delta (x - x0)) + 2 log delta."""
    kind: Literal["composite"] = "composite"
    base: ClosedFormField
    x0: tuple[float, float] = (0.0, 0.0)
    delta: float = Field(..., gt=0)

    @field_validator('x0', mode='before')
    def validate_x0(cls, v):
        return as_point(v)

    def evaluate(self, x, y):
        return self.base(self.delta * (x - self.x0[0]), self.delta * (y - self.x0[1])) + 2.0 * math.log(self.delta)

    @property
    def tail(self):
        if self.base.tail is None or self.base.tail_of != "exp":
            return None
        return self.base.tail.rescaled(self.x0, self.delta)

    @property
    def tail_of(self):
        return "exp" if self.tail is not None else None


class Kelvin(ClosedFormField):
    """x -> base(x0 + sigma^2 (x - x0)/|x - x0|^2) + 4 log(sigma/|x - x0|)."""
    kind: Literal["composite"] = "composite"
    base: ClosedFormField
    x0: tuple[float, float] = (0.0, 0.0)
    sigma: float = Field(..., gt=0)

    @field_validator('x0', mode='before')
    def validate_x0(cls, v):
        return as_point(v)

    def evaluate(self, x, y):
        dx = x - self.x0[0]
        dy = y - self.x0[1]
        r2 = dx * dx + dy * dy
        if np.any(r2 == 0.0):
            raise ConfigError(f"Kelvin transform is undefined at its center {self.x0}")
        s2 = self.sigma ** 2
        xs = self.x0[0] + s2 * dx / r2
        ys = self.x0[1] + s2 * dy / r2
        return self.base(xs, ys) + 2.0 * np.log(s2 / r2)

    @property
    def tail(self):
        #e^{u} ~ e^{base(x0)} sigma^4 |x - x0|^-4 far away
        try:
            value = self.base.at(self.x0)
        except ConfigError:
            return None
        if not math.isfinite(value):
            return None
        return RadialTail(center=self.x0, coeff=math.exp(value) * self.sigma ** 4, beta=0.0, s=2.0)

    @property
    def tail_of(self):
        return "exp" if self.tail is not None else None


class SumOfExponentials(ClosedFormField):
    """log(sum_i e^{u_i}), so that e^{u} = sum_i e^{u_i} exactly."""
    kind: Literal["composite"] = "composite"
    members: tuple[ClosedFormField, ...]

    def evaluate(self, x, y):
        stacked = np.stack(np.broadcast_arrays(*[m(x, y) for m in self.members]))
        return logsumexp(stacked, axis=0)


def _check_depth(depth: int):
    if depth > MAX_DEPTH:
        raise ConfigError(f"transform chain deeper than {MAX_DEPTH}")


def exponents(mu: float, p: float = math.inf) -> ExponentRelations:
    """lambda = (4 - mu)/4 and q with 1/q + 1/(2p) = lambda; p' = p/(p - 1)."""
    if not (0.0 < mu < 2.0):
        raise ConfigError(f"mu must lie in (0, 2), got {mu}")
    if not p > 2.0 / mu:
        raise ConfigError(f"p must exceed 2/mu = {2.0 / mu:.6g}, got {p}")
    lam = (4.0 - mu) / 4.0
    if math.isinf(p):
        return ExponentRelations(mu=mu, lam=lam, p=p, q=1.0 / lam, p_conj=1.0)
    q = 1.0 / (lam - 0.5 / p)
    return ExponentRelations(mu=mu, lam=lam, p=p, q=q, p_conj=p / (p - 1.0))


def bubble_nonlocal(params: BubbleParams) -> NonlocalBubble:
    return NonlocalBubble(params=params)


def bubble_local(x0=(0.0, 0.0), delta: float = 1.0) -> LocalBubble:
    if not delta > 0:
        raise ConfigError(f"bubble scale must be positive, got {delta}")
    return LocalBubble(x0=x0, delta=delta)


def rescale(u: ClosedFormField, x0=(0.0, 0.0), delta: float = 1.0) -> ClosedFormField:
    """u(delta (x - x0)) + 2 log delta; bubbles, constants and rescalings stay normalized."""
    if not delta > 0:
        raise ConfigError(f"rescaling factor must be positive, got {delta}")
    x0 = as_point(x0)
    if isinstance(u, LocalBubble):
        return LocalBubble(x0=(x0[0] + u.x0[0] / delta, x0[1] + u.x0[1] / delta), delta=u.delta * delta)
    if isinstance(u, NonlocalBubble):
        p = u.params
        return NonlocalBubble(params=BubbleParams(
            mu=p.mu,
            x0=(x0[0] + p.x0[0] / delta, x0[1] + p.x0[1] / delta),
            delta=p.delta * delta,
        ))
    if isinstance(u, Constant):
        return Constant(c=u.c + 2.0 * math.log(delta))
    if isinstance(u, Rescaled):
        return Rescaled(base=u.base, x0=(x0[0] + u.x0[0] / delta, x0[1] + u.x0[1] / delta),
                        delta=u.delta * delta, depth=u.depth)
    _check_depth(u.depth + 1)
    return Rescaled(base=u, x0=x0, delta=delta, depth=u.depth + 1)


def kelvin(u: ClosedFormField, x0=(0.0, 0.0), sigma: float = 1.0) -> Kelvin:
    if not sigma > 0:
        raise ConfigError(f"Kelvin radius must be positive, got {sigma}")
    _check_depth(u.depth + 1)
    return Kelvin(base=u, x0=x0, sigma=sigma, depth=u.depth + 1)


def superpose(members: Sequence[ClosedFormField]) -> SumOfExponentials:
    if not members:
        raise ConfigError("superposition needs at least one member")
    depth = max(m.depth for m in members) + 1
    _check_depth(depth)
    return SumOfExponentials(members=tuple(members), depth=depth)


class RiggedFamily(NamedTuple):
    u: RiggedU
    F: RiggedF
    A: float


def rigged_family(k: int, mu: float) -> RiggedFamily:
    """u_k = 2 log(A k/(1 + k^2|x|^2)), F_k = -Delta u_k, A = (4(2 - mu)/pi)^{1/(4 - mu)}."""
    if k < 1:
        raise ConfigError(f"rigged family index must be >= 1, got {k}")
    if not (0.0 < mu < 2.0):
        raise ConfigError(f"mu must lie in (0, 2), got {mu}")
    A = (4.0 * (2.0 - mu) / math.pi) ** (1.0 / (4.0 - mu))
    u = RiggedU(params=BubbleParams(mu=mu, delta=float(k)), k=k)
    return RiggedFamily(u=u, F=RiggedF(k=k), A=A)
