"""Joint projection training by block-coordinate minimization.

The model couples three blocks: a visual projection ``A`` (k x m), a
semantic projection ``B`` (k x d) and a per-sample concept matrix ``C``
(k x n).  With ``X`` the seen visual features, ``Y`` the per-sample
prototype columns and ``H`` a block class-indicator target, the
objective is

    f(A, B, C) = 1/2 ||A X - C||^2
               + lambda1/2 ||B Y - C||^2
               + lambda2/2 ||C - H||^2
               + lambda3/2 ||X - A^T C||^2
               + lambda4/2 ||Y - B^T C||^2

(squared Frobenius norms throughout).  Each block subproblem is solved
exactly: ``A`` and ``B`` via symmetric Sylvester equations whose
operands are Gram matrices of fixed size (independent of the sample
count), ``C`` via one positive definite solve.  Iterating the three
exact updates drives the objective monotonically downward.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import ZslDataset, block_partition, expand_prototypes
from .errors import (
    InvalidHyperparamsError,
    NonUniqueError,
    ShapeMismatchError,
    SingularError,
    TooFewRowsError,
    UnknownClassIdError,
)
from .linalg import solve_spd, sylvester_solve

VARIANTS = ("full", "jcmspl1", "jcmspl0", "ipl", "fpl")

# variants whose loss keeps the class-indicator term, hence need H
_H_VARIANTS = ("full", "jcmspl0")


class RidgeWarning(RuntimeWarning):
    """A singular Gram pair was regularized during a block update."""


@dataclass(frozen=True)
class Hyperparams:
    """Training configuration.

    ``k`` (the concept-space dimension) has no sensible default and must
    be chosen per dataset.  Variants zero out parts of the objective:
    ``jcmspl1`` drops the class-indicator term (lambda2), ``jcmspl0``
    drops both reconstruction terms (lambda3, lambda4), ``ipl`` drops
    all three, and ``fpl`` skips the joint model entirely in favor of a
    direct visual-to-semantic ridge regression.
    """

    k: int
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    lambda4: float = 1.0
    t_max: int = 100
    tol: float = 1e-5
    seed: int = 0
    variant: str = "full"
    ridge_eps: float = 1e-8

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidHyperparamsError(
                f"unknown variant {self.variant!r}; expected one of {VARIANTS}"
            )
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise InvalidHyperparamsError(f"k must be a positive integer, got {self.k!r}")
        if self.t_max < 1:
            raise InvalidHyperparamsError(f"t_max must be >= 1, got {self.t_max}")
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise InvalidHyperparamsError(f"tol must be positive, got {self.tol}")
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "ridge_eps"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise InvalidHyperparamsError(f"{name} must be >= 0, got {value}")

    def effective(self) -> "Hyperparams":
        """Hyperparameters with variant-implied couplings zeroed out."""
        if self.variant == "jcmspl1":
            return dataclasses.replace(self, lambda2=0.0)
        if self.variant == "jcmspl0":
            return dataclasses.replace(self, lambda3=0.0, lambda4=0.0)
        if self.variant == "ipl":
            return dataclasses.replace(self, lambda2=0.0, lambda3=0.0, lambda4=0.0)
        return self


@dataclass(frozen=True)
class ClassSpecificMatrix:
    """Block class-indicator target for the concept matrix.

    ``H`` is k x n with 0/1 entries; column i carries the indicator of
    the row block owned by the class of sample i.  ``block_rows`` maps
    each seen class id to its half-open row range.
    """

    H: np.ndarray
    block_rows: dict[int, tuple[int, int]]


@dataclass(frozen=True)
class JcmsplModel:
    """Trained projections.  ``B`` and ``C`` are None for the fpl variant,
    whose ``A`` maps visual features straight to the semantic space."""

    A: np.ndarray
    B: np.ndarray | None
    C: np.ndarray | None
    variant: str
    hyper: Hyperparams


@dataclass
class TrainingTrace:
    """Per-iteration training record.

    ``losses[0]`` is the objective at initialization; entry t is the
    objective after full iteration t.  ``delta_norms`` and
    ``descent_constants`` hold one (A, B, C) triple per iteration.
    ``converged_at`` is the first iteration where the relative loss
    change dropped below tol, or None if the iteration cap was hit.
    """

    losses: list[float]
    delta_norms: list[tuple[float, float, float]]
    descent_constants: list[tuple[float, float, float]]
    converged_at: int | None
    warnings: list[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.delta_norms)


def build_class_matrix(labels_seen, k: int, seen_classes) -> ClassSpecificMatrix:
    """Build the k x n block class-indicator matrix.

    The k rows are split into ``len(seen_classes)`` contiguous blocks in
    seen-class order (base size k // c, remainder rows one each to the
    earliest classes).  Column i is the 0/1 indicator of the block of
    ``labels_seen[i]``.
    """
    labels = np.asarray(labels_seen, dtype=np.int64)
    classes = [int(c) for c in np.asarray(seen_classes, dtype=np.int64)]
    if k < len(classes):
        raise TooFewRowsError(
            f"k ({k}) must be >= number of seen classes ({len(classes)})"
        )
    block_rows = {
        cid: bounds for cid, bounds in zip(classes, block_partition(k, len(classes)))
    }
    H = np.zeros((k, labels.shape[0]))
    for i, label in enumerate(labels):
        if int(label) not in block_rows:
            raise UnknownClassIdError(f"label {label} is not a seen class")
        start, stop = block_rows[int(label)]
        H[start:stop, i] = 1.0
    return ClassSpecificMatrix(H=H, block_rows=block_rows)


def _fro2(E) -> float:
    return float(np.vdot(E, E))


def _check_joint_shapes(A, B, C, X, Y, H, hyper):
    k, m = A.shape
    if B.shape[0] != k:
        raise ShapeMismatchError(f"A and B disagree on k: {k} vs {B.shape[0]}")
    if C.shape[0] != k:
        raise ShapeMismatchError(f"A and C disagree on k: {k} vs {C.shape[0]}")
    n = C.shape[1]
    if X.shape != (m, n):
        raise ShapeMismatchError(f"X must be ({m}, {n}), got {X.shape}")
    if Y.shape != (B.shape[1], n):
        raise ShapeMismatchError(f"Y must be ({B.shape[1]}, {n}), got {Y.shape}")
    if hyper.lambda2 > 0:
        if H is None:
            raise ShapeMismatchError("H is required when lambda2 > 0")
        if H.shape != (k, n):
            raise ShapeMismatchError(f"H must be ({k}, {n}), got {H.shape}")


def loss(A, B, C, X, Y, H, hyper: Hyperparams) -> float:
    """Evaluate the five-term joint objective at (A, B, C).

    Uses the lambda values exactly as given in ``hyper``; variant
    zeroing is the caller's concern.  ``H`` may be None when lambda2 is
    zero.
    """
    _check_joint_shapes(A, B, C, X, Y, H, hyper)
    value = 0.5 * _fro2(A @ X - C)
    value += 0.5 * hyper.lambda1 * _fro2(B @ Y - C)
    if hyper.lambda2 > 0:
        value += 0.5 * hyper.lambda2 * _fro2(C - H)
    value += 0.5 * hyper.lambda3 * _fro2(X - A.T @ C)
    value += 0.5 * hyper.lambda4 * _fro2(Y - B.T @ C)
    return value


def loss_gradients(A, B, C, X, Y, H, hyper: Hyperparams):
    """Analytic gradients of the joint objective for each block."""
    _check_joint_shapes(A, B, C, X, Y, H, hyper)
    l1, l2, l3, l4 = hyper.lambda1, hyper.lambda2, hyper.lambda3, hyper.lambda4
    gA = (A @ X - C) @ X.T + l3 * (C @ (C.T @ A) - C @ X.T)
    gB = l1 * (B @ Y - C) @ Y.T + l4 * (C @ (C.T @ B) - C @ Y.T)
    gC = (C - A @ X) + l1 * (C - B @ Y) + l3 * (A @ (A.T @ C) - A @ X) \
        + l4 * (B @ (B.T @ C) - B @ Y)
    if l2 > 0:
        gC = gC + l2 * (C - H)
    return gA, gB, gC


def a_update_operands(C, X, lambda3):
    """Gram-matrix operands of the A-step Sylvester equation
    ``M Z + Z N = T``.  Shapes are (k,k), (m,m), (k,m): independent of
    the sample count."""
    return lambda3 * (C @ C.T), X @ X.T, (1.0 + lambda3) * (C @ X.T)


def b_update_operands(C, Y, lambda1, lambda4):
    """Gram-matrix operands of the B-step Sylvester equation."""
    return lambda4 * (C @ C.T), lambda1 * (Y @ Y.T), (lambda1 + lambda4) * (C @ Y.T)


def _solve_block(M, N, T, ridge_eps, block):
    try:
        return sylvester_solve(M, N, T)
    except NonUniqueError:
        if ridge_eps <= 0:
            raise
        # Tikhonov damping scaled by the mean Gram diagonal
        scale = (np.trace(M) + np.trace(N)) / (M.shape[0] + N.shape[0])
        if scale <= 0:
            scale = 1.0
        eps = ridge_eps * scale
        warnings.warn(
            f"{block}-update Gram pair is singular; applying ridge eps={eps:.3e}",
            RidgeWarning,
            stacklevel=3,
        )
        M_r = M + 0.5 * eps * np.eye(M.shape[0])
        N_r = N + 0.5 * eps * np.eye(N.shape[0])
        return sylvester_solve(M_r, N_r, T)


def update_A(C, X, lambda3, ridge_eps: float = 0.0) -> np.ndarray:
    """Exact minimizer of the objective over A with B, C held fixed.

    Solves ``lambda3 C C^T A + A X X^T = (1 + lambda3) C X^T``.  When
    both Grams are singular the equation has no unique solution; a
    positive ``ridge_eps`` falls back to a damped solve (with a
    RidgeWarning), otherwise NonUniqueError propagates.
    """
    return _solve_block(*a_update_operands(C, X, lambda3), ridge_eps, "A")


def update_B(C, Y, lambda1, lambda4, ridge_eps: float = 0.0) -> np.ndarray:
    """Exact minimizer over B: solves
    ``lambda4 C C^T B + B (lambda1 Y Y^T) = (lambda1 + lambda4) C Y^T``."""
    return _solve_block(*b_update_operands(C, Y, lambda1, lambda4), ridge_eps, "B")


def update_C(A, B, X, Y, H, hyper: Hyperparams) -> np.ndarray:
    """Exact minimizer over C, a single positive definite solve:

    ``((1 + l1 + l2) I + l3 A A^T + l4 B B^T) C
        = l2 H + (1 + l3) A X + (l1 + l4) B Y``.
    """
    l1, l2, l3, l4 = hyper.lambda1, hyper.lambda2, hyper.lambda3, hyper.lambda4
    k = A.shape[0]
    if B.shape[0] != k:
        raise ShapeMismatchError(f"A and B disagree on k: {k} vs {B.shape[0]}")
    M = (1.0 + l1 + l2) * np.eye(k) + l3 * (A @ A.T) + l4 * (B @ B.T)
    rhs = (1.0 + l3) * (A @ X) + (l1 + l4) * (B @ Y)
    if l2 > 0:
        if H is None:
            raise ShapeMismatchError("H is required when lambda2 > 0")
        rhs = rhs + l2 * H
    return solve_spd(M, rhs)


def fpl_fit(X, Y, ridge_eps: float = 0.0) -> np.ndarray:
    """Closed-form visual-to-semantic regression ``A = Y X^T (X X^T + eps I)^-1``.

    With ``ridge_eps = 0`` a rank-deficient visual Gram raises
    SingularError instead of producing a garbage inverse.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[1] != Y.shape[1]:
        raise ShapeMismatchError(
            f"X and Y disagree on sample count: {X.shape[1]} vs {Y.shape[1]}"
        )
    G = X @ X.T
    if ridge_eps > 0:
        G = G + ridge_eps * np.eye(G.shape[0])
    else:
        ev = np.linalg.eigvalsh(0.5 * (G + G.T))
        if ev[-1] <= 0 or ev[0] <= 1e-12 * ev[-1]:
            raise SingularError(
                "visual Gram is singular; set ridge_eps > 0 to regularize"
            )
    return solve_spd(G, X @ Y.T).T


def _min_sq_singular(P, Q) -> float:
    # smallest eigenvalue of P^T P + Q^T Q, an n x n matrix; zero exactly
    # when n exceeds the stacked row count, else the squared smallest
    # singular value of the (rows(P)+rows(Q)) x n stack
    if P.shape[1] != Q.shape[1]:
        raise ShapeMismatchError(
            f"operands disagree on column count: {P.shape[1]} vs {Q.shape[1]}"
        )
    W = np.vstack([P, Q])
    n = W.shape[1]
    if n > W.shape[0]:
        return 0.0
    s = np.linalg.svd(W, compute_uv=False)
    return float(s[-1] ** 2)


def descent_constants(A_next, B_next, C, X, Y, hyper: Hyperparams):
    """Strong-convexity moduli of the three block subproblems.

    Returns (m_A, m_B, m_C):

    - m_A = smallest eigenvalue of ``lambda3 C^T C + X^T X``
    - m_B = smallest eigenvalue of ``lambda4 C^T C + lambda1 Y^T Y``
    - m_C = smallest eigenvalue of
      ``(1 + lambda1 + lambda2) I + lambda3 A A^T + lambda4 B B^T``
      evaluated at the freshly updated A and B.

    Each full iteration then obeys
    ``f_next - f <= -(m_A/2)||dA||^2 - (m_B/2)||dB||^2 - (m_C/2)||dC||^2``
    up to roundoff, since every block update is an exact minimizer of a
    quadratic with at least that curvature.
    """
    l1, l2, l3, l4 = hyper.lambda1, hyper.lambda2, hyper.lambda3, hyper.lambda4
    m_a = _min_sq_singular(math.sqrt(l3) * C, X)
    m_b = _min_sq_singular(math.sqrt(l4) * C, math.sqrt(l1) * Y)
    k = A_next.shape[0]
    M = (1.0 + l1 + l2) * np.eye(k) + l3 * (A_next @ A_next.T) \
        + l4 * (B_next @ B_next.T)
    m_c = float(np.linalg.eigvalsh(M)[0])
    return m_a, m_b, m_c


def fit(dataset: ZslDataset, hyper: Hyperparams) -> tuple[JcmsplModel, TrainingTrace]:
    """Train a model by exact block-coordinate descent.

    Per iteration the blocks are updated in the order A, B, C, each to
    the exact minimizer of its subproblem.  The loop stops when the
    relative objective change ``|f_t - f_prev| / (1 + f_prev)`` drops
    below ``hyper.tol``, or after ``hyper.t_max`` iterations.

    Initialization draws A, B, C (in that order) from a seeded Gaussian
    with standard deviation 0.01, so identical inputs reproduce the run
    bitwise.  The ``fpl`` variant bypasses the loop entirely.

    Returns the model together with a TrainingTrace of losses, block
    step norms, descent constants and any ridge-regularization warnings.
    """
    X = dataset.visual_seen
    Y = expand_prototypes(dataset.prototypes, dataset.labels_seen)

    if hyper.variant == "fpl":
        A = fpl_fit(X, Y, hyper.ridge_eps)
        trace = TrainingTrace(
            losses=[0.5 * _fro2(A @ X - Y)],
            delta_norms=[],
            descent_constants=[],
            converged_at=0,
        )
        return JcmsplModel(A=A, B=None, C=None, variant="fpl", hyper=hyper), trace

    eff = hyper.effective()
    H = None
    if hyper.variant in _H_VARIANTS:
        H = build_class_matrix(dataset.labels_seen, hyper.k, dataset.seen_classes).H

    rng = np.random.default_rng(hyper.seed)
    A = 0.01 * rng.standard_normal((hyper.k, dataset.m))
    B = 0.01 * rng.standard_normal((hyper.k, dataset.d))
    C = 0.01 * rng.standard_normal((hyper.k, dataset.n_seen))

    f_prev = loss(A, B, C, X, Y, H, eff)
    trace = TrainingTrace(
        losses=[f_prev], delta_norms=[], descent_constants=[], converged_at=None
    )
    for t in range(1, hyper.t_max + 1):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            A_next = update_A(C, X, eff.lambda3, eff.ridge_eps)
            B_next = update_B(C, Y, eff.lambda1, eff.lambda4, eff.ridge_eps)
        for w in caught:
            trace.warnings.append(f"iteration {t}: {w.message}")
        constants = descent_constants(A_next, B_next, C, X, Y, eff)
        C_next = update_C(A_next, B_next, X, Y, H, eff)
        deltas = (
            float(np.linalg.norm(A_next - A)),
            float(np.linalg.norm(B_next - B)),
            float(np.linalg.norm(C_next - C)),
        )
        A, B, C = A_next, B_next, C_next
        f_t = loss(A, B, C, X, Y, H, eff)
        trace.losses.append(f_t)
        trace.delta_norms.append(deltas)
        trace.descent_constants.append(constants)
        if abs(f_t - f_prev) / (1.0 + f_prev) < hyper.tol:
            trace.converged_at = t
            break
        f_prev = f_t

    model = JcmsplModel(A=A, B=B, C=C, variant=hyper.variant, hyper=hyper)
    return model, trace


TRACE_COLUMNS = ("iteration", "loss", "dA", "dB", "dC", "mA", "mB", "mC")


def write_trace_csv(trace: TrainingTrace, path) -> None:
    """Write the trace as CSV.  Row 0 carries the initialization loss
    with zero step norms and constants; row t the values of iteration t."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        writer.writerow([0, f"{trace.losses[0]:.17g}"] + ["0"] * 6)
        for t in range(1, len(trace.losses)):
            dA, dB, dC = trace.delta_norms[t - 1]
            mA, mB, mC = trace.descent_constants[t - 1]
            writer.writerow(
                [t] + [f"{v:.17g}" for v in (trace.losses[t], dA, dB, dC, mA, mB, mC)]
            )
