"""Synthetic GLM problems with controllable row coherence."""
from typing import Any, Dict, Optional

import numpy as np
from scipy.special import expit

from .dataset_loader import Dataset

COHERENCE_PROFILES = ["incoherent", "one_heavy_row", "power_law"]
LABEL_MODELS = ["logistic", "linear"]


class SyntheticSpec:
    """Description of a synthetic problem.

    Coherence profiles:
        incoherent       i.i.d. standard normal entries;
        one_heavy_row    the first row carries `weight` of the total squared Frobenius mass;
        power_law        squared row norms decay like (i + 1)^(-exponent), rows shuffled.
    """

    @staticmethod
    def from_dict(data: Dict[Any, Any]) -> "SyntheticSpec":
        """Parses a `SyntheticSpec` from a config section.

        `coherence` is either a profile name or a one-entry mapping `{profile: parameter}`.
        """
        coherence = data.get("coherence", "incoherent")
        parameter: Optional[float] = None
        if isinstance(coherence, dict):
            if len(coherence) != 1:
                raise ValueError(f"Coherence must name exactly one profile, got {coherence}")
            coherence, parameter = next(iter(coherence.items()))
            parameter = float(parameter)

        return SyntheticSpec(
            n=int(data["n"]),
            d=int(data["d"]),
            coherence=str(coherence),
            coherence_parameter=parameter,
            label_model=data.get("label_model", "logistic"),
            noise_seed=int(data.get("noise_seed", 0)),
            signal_scale=float(data.get("signal_scale", 1.0)),
        )

    # pylint: disable=too-many-arguments
    def __init__(
        self,
        n: int,
        d: int,
        coherence: str = "incoherent",
        coherence_parameter: Optional[float] = None,
        label_model: str = "logistic",
        noise_seed: int = 0,
        signal_scale: float = 1.0,
    ) -> None:
        if n < 1 or d < 1:
            raise ValueError(f"Synthetic problem needs n >= 1 and d >= 1, got n = {n}, d = {d}")
        if n < d:
            raise ValueError(f"Synthetic problem needs n >= d, got n = {n}, d = {d}")
        if coherence not in COHERENCE_PROFILES:
            raise ValueError(f"Incorrect coherence '{coherence}'. Available profiles are: {COHERENCE_PROFILES}")
        if label_model not in LABEL_MODELS:
            raise ValueError(f"Incorrect label model '{label_model}'. Available models are: {LABEL_MODELS}")

        if coherence == "one_heavy_row":
            if coherence_parameter is None or not 0.0 < coherence_parameter < 1.0:
                raise ValueError(f"Heavy row weight must lie in (0, 1), got {coherence_parameter}")
            if n < 2:
                raise ValueError(f"One heavy row needs at least one other row to share the mass, got n = {n}")
        elif coherence == "power_law":
            if coherence_parameter is None or coherence_parameter <= 0.0:
                raise ValueError(f"Power law exponent must be positive, got {coherence_parameter}")

        self.n = n
        self.d = d
        self.coherence = coherence
        self.coherence_parameter = coherence_parameter
        self.label_model = label_model
        self.noise_seed = noise_seed
        self.signal_scale = signal_scale

    def to_dict(self) -> Dict[str, Any]:
        """Inverse of `from_dict`."""
        coherence: Any = self.coherence
        if self.coherence_parameter is not None:
            coherence = {self.coherence: self.coherence_parameter}
        return {
            "n": self.n,
            "d": self.d,
            "coherence": coherence,
            "label_model": self.label_model,
            "noise_seed": self.noise_seed,
            "signal_scale": self.signal_scale,
        }

    def __str__(self) -> str:
        profile = self.coherence
        if self.coherence_parameter is not None:
            profile = f"{profile}({self.coherence_parameter:g})"
        return f"synthetic:{self.n}x{self.d}:{profile}"


def generate(spec: SyntheticSpec) -> Dataset:
    """Draws the data matrix, the true signal and the labels from `spec.noise_seed`."""
    rng = np.random.default_rng(spec.noise_seed)
    x = rng.standard_normal((spec.n, spec.d))

    if spec.coherence == "one_heavy_row":
        weight = spec.coherence_parameter
        rest = float(np.sum(x[1:] ** 2))
        x[0] *= np.sqrt(weight / (1.0 - weight) * rest / float(x[0] @ x[0]))
    elif spec.coherence == "power_law":
        target = np.arange(1, spec.n + 1, dtype=np.float64) ** (-spec.coherence_parameter)
        x *= np.sqrt(target / np.sum(x ** 2, axis=1))[:, None]
        x = x[rng.permutation(spec.n)]

    w_true = spec.signal_scale * rng.standard_normal(spec.d) / np.sqrt(spec.d)
    margins = x @ w_true
    if spec.label_model == "logistic":
        y = np.where(rng.random(spec.n) < expit(margins), 1.0, -1.0)
    else:
        y = margins + 0.1 * rng.standard_normal(spec.n)

    return Dataset(x=x, y=y, label_mapping={}, source=str(spec), w_true=w_true)
