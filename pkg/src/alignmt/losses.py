"""Translation likelihood and attention-disagreement losses.

The training objective for one pair is

    -sum_t log p(y_t | y_<t, x)  +  weight * delta(alpha, alpha_hat)

where ``alpha`` is the predicted attention matrix, ``alpha_hat`` the
supervision built from an external aligner, and ``delta`` one of:

* ``mse``: half the sum of squared elementwise differences,
* ``mul``: negative log of the total elementwise product mass
  (a single log over the global sum, not one per row),
* ``ce``: cross entropy of each predicted row under the supervision row.

``alpha_hat`` is a constant, never a trained quantity.  Log arguments are
clamped to at least ``LOG_EPS`` (shared with ``numerics``), so ``mul`` and
``ce`` stay finite when predicted mass underflows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SentencePair
from .errors import ConfigurationError, DomainError, NumericError, ShapeError
from .model import BoundModel, ForwardPass, forward_teacher_forced
from .numerics import LOG_EPS, Node, concat_rows

DELTA_KINDS = ("none", "mse", "mul", "ce")


@dataclass(frozen=True)
class LossConfig:
    """Which disagreement loss to add and with what weight.

    ``kind="none"`` is the plain translation objective; ``weight`` is the
    balance hyper-parameter between likelihood and disagreement.
    """

    kind: str = "ce"
    weight: float = 0.3

    def __post_init__(self):
        if self.kind not in DELTA_KINDS:
            raise ConfigurationError(f"unknown delta kind {self.kind!r}")
        if self.weight < 0:
            raise DomainError(f"weight must be nonnegative, got {self.weight}")

    @property
    def supervised(self) -> bool:
        return self.kind != "none"


# ---------------------------------------------------------------------------
# Eager forms (fixtures, reporting, oracles)
# ---------------------------------------------------------------------------

def nll(gold_log_probs) -> float:
    """Negated sum of per-step gold log-probabilities (eol step included)."""
    arr = np.asarray(gold_log_probs, dtype=np.float64)
    if arr.size and arr.max() > 0:
        raise NumericError(f"positive log-probability {arr.max()!r}")
    return float(-arr.sum())


def _check_shapes(alpha: np.ndarray, alpha_hat: np.ndarray) -> None:
    if alpha.shape != alpha_hat.shape:
        raise ShapeError(f"attention shape {alpha.shape} != supervision shape {alpha_hat.shape}")


def delta_mse(alpha: np.ndarray, alpha_hat: np.ndarray) -> float:
    alpha = np.asarray(alpha, dtype=np.float64)
    alpha_hat = np.asarray(alpha_hat, dtype=np.float64)
    _check_shapes(alpha, alpha_hat)
    d = alpha - alpha_hat
    return float(0.5 * np.sum(d * d))


def delta_mul(alpha: np.ndarray, alpha_hat: np.ndarray) -> float:
    alpha = np.asarray(alpha, dtype=np.float64)
    alpha_hat = np.asarray(alpha_hat, dtype=np.float64)
    _check_shapes(alpha, alpha_hat)
    total = np.sum(alpha * alpha_hat)
    return float(-np.log(max(total, LOG_EPS)))


def delta_ce(alpha: np.ndarray, alpha_hat: np.ndarray) -> float:
    alpha = np.asarray(alpha, dtype=np.float64)
    alpha_hat = np.asarray(alpha_hat, dtype=np.float64)
    _check_shapes(alpha, alpha_hat)
    if np.any(alpha < 0):
        raise DomainError("attention entries must be nonnegative")
    # zero supervision mass contributes zero regardless of alpha
    return float(-np.sum(alpha_hat * np.log(np.maximum(alpha, LOG_EPS))))


def delta(kind: str, alpha: np.ndarray, alpha_hat: np.ndarray) -> float:
    return {"mse": delta_mse, "mul": delta_mul, "ce": delta_ce}[kind](alpha, alpha_hat)


# ---------------------------------------------------------------------------
# Recorded forms
# ---------------------------------------------------------------------------

def _delta_node(kind: str, alpha_rows: list[Node], alpha_hat: np.ndarray) -> Node:
    tape = alpha_rows[0].tape
    if alpha_hat.shape != (len(alpha_rows), alpha_rows[0].value.shape[1]):
        raise ShapeError(
            f"supervision shape {alpha_hat.shape} != attention shape "
            f"({len(alpha_rows)}, {alpha_rows[0].value.shape[1]})"
        )
    refs = [tape.leaf(alpha_hat[t]) for t in range(alpha_hat.shape[0])]
    if kind == "mse":
        per_row = [((a - r) * (a - r)).sum() for a, r in zip(alpha_rows, refs)]
        return concat_rows(per_row).sum() * 0.5
    if kind == "mul":
        per_row = [(a * r).sum() for a, r in zip(alpha_rows, refs)]
        return -(concat_rows(per_row).sum().log())
    if kind == "ce":
        per_row = [(r * a.log()).sum() for a, r in zip(alpha_rows, refs)]
        return -(concat_rows(per_row).sum())
    raise ConfigurationError(f"unknown delta kind {kind!r}")


@dataclass
class LossBreakdown:
    """Joint objective for one pair, with its parts for logging."""

    total: Node
    nll_value: float
    delta_value: float
    forward: ForwardPass


def joint_loss(
    pair: SentencePair,
    alpha_hat: np.ndarray | None,
    model: BoundModel,
    config: LossConfig,
) -> LossBreakdown:
    """Translation loss plus weighted attention disagreement, recorded on
    the model's tape for backpropagation."""
    if config.supervised and alpha_hat is None:
        raise ConfigurationError(
            f"delta kind {config.kind!r} requires attention supervision"
        )
    fwd = forward_teacher_forced(pair, model)
    nll_node = -(concat_rows(fwd.log_probs).sum())
    if config.supervised:
        delta_node = _delta_node(config.kind, fwd.alpha_rows, alpha_hat)
        total = nll_node + delta_node * config.weight
        delta_value = float(delta_node.value[0, 0])
    else:
        total = nll_node
        delta_value = 0.0
    return LossBreakdown(
        total=total,
        nll_value=float(nll_node.value[0, 0]),
        delta_value=delta_value,
        forward=fwd,
    )
