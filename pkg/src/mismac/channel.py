"""Channel, metric and input description for the two-user MAC."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import InvalidConfig
from .probability import Alphabets, assert_distribution

ROW_ATOL = 1e-9


@dataclass(frozen=True)
class ChannelSpec:
    """A discrete memoryless two-user MAC with a fixed decoding metric.

    ``w[x1, x2, y]`` is the channel transition probability W(y | x1, x2) and
    ``metric`` the (unnormalized) decoding metric q(x1, x2, y).  Inputs are
    either independent per-user distributions (standard MAC) or a joint
    input distribution ``q12`` (cognitive MAC with superposition coding).
    """

    w: np.ndarray
    metric: np.ndarray
    mac_kind: str = "standard"
    q1: Optional[np.ndarray] = None
    q2: Optional[np.ndarray] = None
    q12: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        q = np.asarray(self.metric, dtype=float)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "metric", q)
        if w.ndim != 3:
            raise InvalidConfig("channel must be a 3-d array (x1, x2, y)")
        if q.shape != w.shape:
            raise InvalidConfig("metric shape must match the channel shape")
        if w.min() < 0 or q.min() < 0:
            raise InvalidConfig("channel and metric must be nonnegative")
        rows = w.sum(axis=2)
        if np.max(np.abs(rows - 1.0)) > ROW_ATOL:
            raise InvalidConfig("channel rows must sum to one")
        if np.any((w > 0) & (q == 0)):
            raise InvalidConfig("metric must be positive on the channel support")
        if self.mac_kind not in ("standard", "cognitive"):
            raise InvalidConfig("mac_kind must be standard or cognitive")
        if self.mac_kind == "standard":
            if self.q1 is None or self.q2 is None:
                raise InvalidConfig("standard MAC needs per-user inputs q1, q2")
            q1 = np.asarray(self.q1, dtype=float)
            q2 = np.asarray(self.q2, dtype=float)
            if q1.shape != (w.shape[0],) or q2.shape != (w.shape[1],):
                raise InvalidConfig("input sizes must match the channel")
            try:
                assert_distribution(q1)
                assert_distribution(q2)
            except ValueError as exc:
                raise InvalidConfig(str(exc)) from exc
            object.__setattr__(self, "q1", q1)
            object.__setattr__(self, "q2", q2)
        else:
            if self.q12 is None:
                raise InvalidConfig("cognitive MAC needs a joint input q12")
            q12 = np.asarray(self.q12, dtype=float)
            if q12.shape != w.shape[:2]:
                raise InvalidConfig("joint input size must match the channel")
            try:
                assert_distribution(q12)
            except ValueError as exc:
                raise InvalidConfig(str(exc)) from exc
            object.__setattr__(self, "q12", q12)

    @property
    def alphabets(self) -> Alphabets:
        return Alphabets(*self.w.shape)

    @property
    def input_joint(self) -> np.ndarray:
        """Joint input distribution over (x1, x2)."""
        if self.mac_kind == "standard":
            return np.outer(self.q1, self.q2)
        return self.q12

    @property
    def p_joint(self) -> np.ndarray:
        """Nominal joint distribution (input times channel) over cells."""
        return self.input_joint[:, :, None] * self.w

    @property
    def log_metric(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.metric > 0, np.log(np.where(self.metric > 0, self.metric, 1.0)), -np.inf)

    def matched(self) -> "ChannelSpec":
        """Same channel and inputs decoded with the true channel law."""
        return replace(self, metric=self.w.copy())

    def with_metric(self, metric: np.ndarray) -> "ChannelSpec":
        return replace(self, metric=np.asarray(metric, dtype=float))


def noisy_addition_channel(deltas: np.ndarray) -> np.ndarray:
    """Ternary-output adder family: y = x1 + x2 unless a per-pair flip occurs.

    ``deltas[x1, x2]`` is the crossover weight: the correct sum receives
    probability 1 - 2 * delta and each wrong output receives delta.
    """
    deltas = np.asarray(deltas, dtype=float)
    nx1, nx2 = deltas.shape
    ny = nx1 + nx2 - 1
    w = np.zeros((nx1, nx2, ny))
    for a in range(nx1):
        for b in range(nx2):
            d = deltas[a, b]
            w[a, b, :] = d
            w[a, b, a + b] = 1.0 - (ny - 1) * d
    if w.min() < 0:
        raise InvalidConfig("delta parameters leave negative probabilities")
    return w


def spec_from_config(doc: dict) -> ChannelSpec:
    """Build a ChannelSpec from a parsed configuration document."""
    if not isinstance(doc, dict):
        raise InvalidConfig("configuration must be an object")
    chan = doc.get("channel")
    if not isinstance(chan, dict):
        raise InvalidConfig("missing channel section")
    if "w" in chan:
        w = np.asarray(chan["w"], dtype=float)
    elif "deltas" in chan:
        w = noisy_addition_channel(np.asarray(chan["deltas"], dtype=float))
    else:
        raise InvalidConfig("channel needs either w or deltas")
    met = doc.get("metric", {})
    if "q" in met:
        q = np.asarray(met["q"], dtype=float)
    elif "delta" in met:
        d = float(met["delta"])
        q = noisy_addition_channel(np.full(w.shape[:2], d))
        if q.shape != w.shape:
            raise InvalidConfig("parametric metric shape does not match channel")
    elif met.get("matched", False):
        q = w.copy()
    else:
        raise InvalidConfig("metric needs q, delta or matched: true")
    inputs = doc.get("inputs", {})
    mac_kind = doc.get("mac_kind", "standard")
    if mac_kind == "cognitive":
        if "q12" in inputs:
            q12 = np.asarray(inputs["q12"], dtype=float)
        elif "q1" in inputs and "q2" in inputs:
            q12 = np.outer(np.asarray(inputs["q1"], float), np.asarray(inputs["q2"], float))
        else:
            raise InvalidConfig("cognitive inputs need q12 (or q1 and q2)")
        return ChannelSpec(w=w, metric=q, mac_kind="cognitive", q12=q12)
    if "q1" not in inputs or "q2" not in inputs:
        raise InvalidConfig("standard inputs need q1 and q2")
    return ChannelSpec(w=w, metric=q, mac_kind="standard",
                       q1=np.asarray(inputs["q1"], float),
                       q2=np.asarray(inputs["q2"], float))
