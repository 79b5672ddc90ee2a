"""Central finite-difference verification of every analytic gradient.

Each component check draws seeded random inputs, computes the analytic
gradient, re-derives it numerically with central differences (default step
1e-5, float64 throughout), and reports the worst relative error in the norm
sense: ||g_a - g_n|| / max(||g_a||, ||g_n||). The full-model check sweeps
every parameter coordinate of a tiny encoder, so the whole backward pass is
exercised, not just the losses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as model_mod
from .errors import NumericError
from .losses import CenterBank, LossConfig, center_loss, joint_loss, recognition_loss

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4

# Kept tiny so a full coordinate sweep of the composition stays cheap.
TINY_MODEL = model_mod.ModelConfig(
    d_in=3, d_model=8, n_layers=1, n_heads=2, d_ff=12, d_proj=4,
    n_classes=4, projection_dropout=0.0, reduction="first_vector", max_len=8,
)


@dataclass(frozen=True)
class ComponentResult:
    name: str
    n_cases: int
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


@dataclass(frozen=True)
class GradcheckReport:
    components: tuple[ComponentResult, ...]
    seed: int
    step: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.components)

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "step": self.step,
            "passed": self.passed,
            "components": [
                {
                    "name": c.name,
                    "n_cases": c.n_cases,
                    "max_rel_error": c.max_rel_error,
                    "tolerance": c.tolerance,
                    "passed": c.passed,
                }
                for c in self.components
            ],
        }


def _rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    na = float(np.linalg.norm(analytic))
    nn = float(np.linalg.norm(numeric))
    denom = max(na, nn)
    if denom < 1e-12:
        return 0.0
    return float(np.linalg.norm(analytic - numeric)) / denom


def _numeric_gradient(fn, x: np.ndarray, step: float) -> np.ndarray:
    grad = np.empty_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = fn()
        flat[i] = orig - step
        down = fn()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * step)
    return grad


def _softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


def check_recognition(rng: np.random.Generator, n_cases: int, step: float, corrupt: bool = False) -> float:
    """Gradient of the KL recognition loss through the softmax, per logit."""
    worst = 0.0
    for _ in range(n_cases):
        n = int(rng.integers(2, 7))
        target = rng.dirichlet(np.ones(n))
        logits = rng.uniform(-3.0, 3.0, size=n)
        _, analytic = recognition_loss(target, _softmax(logits))
        if corrupt:
            analytic = analytic * 1.01 + 0.01
        numeric = _numeric_gradient(lambda: recognition_loss(target, _softmax(logits))[0], logits, step)
        worst = max(worst, _rel_error(analytic, numeric))
    return worst


def check_center(rng: np.random.Generator, n_cases: int, step: float) -> float:
    """Gradient of the center loss with respect to the features."""
    worst = 0.0
    for _ in range(n_cases):
        n = int(rng.integers(1, 5))
        d = int(rng.integers(2, 6))
        n_classes = int(rng.integers(2, 5))
        feats = rng.uniform(-2.0, 2.0, size=(n, d))
        targets = rng.dirichlet(np.ones(n_classes), size=n)
        bank = CenterBank(rng.uniform(-1.0, 1.0, size=(n_classes, d)))
        _, analytic = center_loss(feats, targets, bank)
        numeric = _numeric_gradient(lambda: center_loss(feats, targets, bank)[0], feats, step)
        worst = max(worst, _rel_error(analytic, numeric))
    return worst


def check_joint(rng: np.random.Generator, n_cases: int, step: float) -> float:
    """Joint loss gradient at the logits and features simultaneously."""
    worst = 0.0
    for _ in range(n_cases):
        n_classes = int(rng.integers(2, 6))
        d = int(rng.integers(2, 6))
        target = rng.dirichlet(np.ones(n_classes))
        logits = rng.uniform(-3.0, 3.0, size=n_classes)
        feats = rng.uniform(-2.0, 2.0, size=(1, d))
        bank = CenterBank(rng.uniform(-1.0, 1.0, size=(n_classes, d)))
        config = LossConfig(lambda_center=float(rng.uniform(0.0, 0.01)))

        def loss_value():
            probs = _softmax(logits)
            value, _ = joint_loss(target, probs, feats, bank, config)
            return value

        probs = _softmax(logits)
        _, g_logits = recognition_loss(target, probs)
        _, g_feats = center_loss(feats, target, bank)
        analytic = np.concatenate([g_logits, (config.lambda_center * g_feats).reshape(-1)])
        numeric = np.concatenate(
            [
                _numeric_gradient(loss_value, logits, step),
                _numeric_gradient(loss_value, feats, step).reshape(-1),
            ]
        )
        worst = max(worst, _rel_error(analytic, numeric))
    return worst


def _flatten(grads: dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([grads[name].reshape(-1) for name in sorted(grads)])


def check_model(rng: np.random.Generator, n_cases: int, step: float) -> float:
    """Full composition: joint loss of the tiny encoder, swept over every
    parameter coordinate."""
    config = TINY_MODEL
    loss_config = LossConfig(lambda_center=0.002)
    worst = 0.0
    for _ in range(n_cases):
        params = model_mod.init_params(config, seed=int(rng.integers(0, 2**31)))
        t = int(rng.integers(2, 7))
        signal = rng.uniform(-1.0, 1.0, size=(t, config.d_in))
        target = rng.dirichlet(np.ones(config.n_classes))
        bank = CenterBank(rng.uniform(-1.0, 1.0, size=(config.n_classes, config.d_proj)))

        cache = model_mod._forward(config, params, signal, False, None)
        _, g_logits = recognition_loss(target, cache["probs"], loss_config.epsilon)
        _, g_feats = center_loss(cache["vec"], target, bank)
        analytic = model_mod.backward(
            config, params, cache,
            d_logits=g_logits,
            d_vec=loss_config.lambda_center * g_feats[0],
        )

        def loss_value():
            c = model_mod._forward(config, params, signal, False, None)
            value, _ = joint_loss(target, c["probs"], c["vec"], bank, loss_config)
            return value

        numeric = {name: _numeric_gradient(loss_value, p, step) for name, p in params.items()}
        worst = max(worst, _rel_error(_flatten(analytic), _flatten(numeric)))
    return worst


def run_gradcheck(
    seed: int = 0,
    cases: int = 100,
    step: float = DEFAULT_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
    model_cases: int | None = None,
    inject_fault: bool = False,
) -> GradcheckReport:
    """Run every component check; ``inject_fault`` corrupts one analytic
    gradient on purpose so the failure path can be exercised."""
    if model_cases is None:
        model_cases = cases
    rng = np.random.default_rng(seed)
    components = (
        ComponentResult("recognition_loss", cases, check_recognition(rng, cases, step, corrupt=inject_fault), tolerance),
        ComponentResult("center_loss", cases, check_center(rng, cases, step), tolerance),
        ComponentResult("joint_loss", cases, check_joint(rng, cases, step), tolerance),
        ComponentResult("model_composition", model_cases, check_model(rng, model_cases, step), tolerance),
    )
    return GradcheckReport(components=components, seed=seed, step=step)


def require_pass(report: GradcheckReport) -> None:
    if not report.passed:
        failing = [c.name for c in report.components if not c.passed]
        raise NumericError(f"gradient check failed for: {', '.join(failing)}")
