"""
Settings of the ρ-bounded adversaries: :class:`AdversaryConfig` and the named presets.

Two regimes are supported and never mixed in one run:

* **empirical**: ``l_inf`` ball around pixel data, clamped to ``[0, 1]`` (the benchmark
  training and evaluation settings);
* **theory**: ``l2_sphere``, where inputs and attacks live on the unit sphere and the ball is
  the ℓ₂ ball intersected with it.

Presets::

    >>> AdversaryConfig.training_preset()
    AdversaryConfig(pgd l_inf ρ=8/255 steps=7 step=2/255 clamp=(0.0, 1.0))
    >>> AdversaryConfig.evaluation_preset(3 / 255, 'pgd')
    AdversaryConfig(pgd l_inf ρ=3/255 steps=20 step=0.375/255 clamp=(0.0, 1.0))

.. autoclass:: AdversaryConfig
    :members: fgsm, pgd, on_sphere, training_preset, evaluation_preset, metric_name

.. autofunction:: evaluation_presets

.. autodata:: EVALUATION_RADII
.. autodata:: RADIUS_SWEEP
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

from robnas.errors import ValidationError


class AttackKind(str, enum.Enum):
    FGSM = 'fgsm'
    PGD = 'pgd'


class Norm(str, enum.Enum):
    L_INF = 'l_inf'
    L2_SPHERE = 'l2_sphere'


#: Radii of the benchmark's robust metrics
EVALUATION_RADII: Tuple[float, ...] = (3 / 255, 8 / 255)

#: Radii of the PGD robustness sweep
RADIUS_SWEEP: Tuple[float, ...] = tuple(r / 255 for r in (3, 8, 16, 32, 64, 128, 255))

#: Data range of images
PIXEL_RANGE = (0.0, 1.0)


@dataclass(frozen=True)
class AdversaryConfig:
    """
    One attack setting. ``step_size`` defaults to ``ρ`` for FGSM (the only allowed value) and to
    ``2.5·ρ/steps`` for PGD.

    .. autoattribute:: kind
    .. autoattribute:: radius
    .. autoattribute:: steps
    .. autoattribute:: step_size
    .. autoattribute:: norm
    .. autoattribute:: clamp
    .. autoattribute:: random_start
    .. autoattribute:: seed
    """

    #: ``fgsm`` or ``pgd``
    kind: AttackKind = AttackKind.PGD
    #: Radius ``ρ`` of the ball, in input units
    radius: float = 8 / 255
    #: Number of gradient steps
    steps: int = 7
    #: Step length (``None`` for the kind's default)
    step_size: Optional[float] = None
    #: Ball geometry
    norm: Norm = Norm.L_INF
    #: Data range ``(lo, hi)`` every output is clipped to, if any
    clamp: Optional[Tuple[float, float]] = None
    #: Start from a uniformly random point of the ball
    random_start: bool = False
    #: Seed of the random start
    seed: int = 0

    def __post_init__(self):
        kind = AttackKind(self.kind)
        norm = Norm(self.norm)
        object.__setattr__(self, 'kind', kind)
        object.__setattr__(self, 'norm', norm)

        if self.radius < 0:
            raise ValidationError(f"Attack radius must be >= 0, got {self.radius}")
        if self.steps < 1:
            raise ValidationError(f"Attack needs at least one step, got {self.steps}")

        if self.step_size is None:
            default = self.radius if kind == AttackKind.FGSM else 2.5 * self.radius / self.steps
            object.__setattr__(self, 'step_size', default)

        if kind == AttackKind.FGSM and (self.steps != 1 or self.step_size != self.radius):
            raise ValidationError(f"FGSM is a single step of size ρ, got steps={self.steps} step_size={self.step_size}")
        if self.step_size < 0 or (self.step_size == 0 and self.radius > 0):
            raise ValidationError(f"step_size must be positive, got {self.step_size}")

        if self.clamp is not None:
            if norm == Norm.L2_SPHERE:
                raise ValidationError("l2_sphere attacks stay on the unit sphere and can't be clamped")
            lo, hi = self.clamp
            if lo >= hi:
                raise ValidationError(f"Invalid clamp range {self.clamp}")
            object.__setattr__(self, 'clamp', (float(lo), float(hi)))

    @classmethod
    def fgsm(cls, radius: float, clamp: Optional[Tuple[float, float]] = PIXEL_RANGE,
             norm: Norm = Norm.L_INF) -> AdversaryConfig:
        return cls(AttackKind.FGSM, radius, steps=1, step_size=radius, norm=norm, clamp=clamp)

    @classmethod
    def pgd(cls, radius: float, steps: int = 20, step_size: Optional[float] = None,
            clamp: Optional[Tuple[float, float]] = PIXEL_RANGE, **kwargs) -> AdversaryConfig:
        return cls(AttackKind.PGD, radius, steps=steps, step_size=step_size, clamp=clamp, **kwargs)

    @classmethod
    def on_sphere(cls, radius: float, kind: AttackKind = AttackKind.PGD, steps: int = 20) -> AdversaryConfig:
        """Theory-regime attack: ℓ₂ ball, outputs renormalized to the unit sphere."""
        if AttackKind(kind) == AttackKind.FGSM:
            return cls.fgsm(radius, clamp=None, norm=Norm.L2_SPHERE)
        return cls(AttackKind.PGD, radius, steps=steps, norm=Norm.L2_SPHERE)

    @classmethod
    def training_preset(cls) -> AdversaryConfig:
        """PGD-7 with step 2/255 inside the 8/255 ``l_inf`` ball, as adversarial training uses."""
        return cls.pgd(8 / 255, steps=7, step_size=2 / 255)

    @classmethod
    def evaluation_preset(cls, radius: float, kind: AttackKind = AttackKind.PGD) -> AdversaryConfig:
        """FGSM, or PGD-20 with step ``2.5·ρ/20``, at ``radius``."""
        if AttackKind(kind) == AttackKind.FGSM:
            return cls.fgsm(radius)
        return cls.pgd(radius, steps=20)

    def with_radius(self, radius: float) -> AdversaryConfig:
        """Same attack at another radius (step size rescaled proportionally)."""
        if self.kind == AttackKind.FGSM:
            return replace(self, radius=radius, step_size=radius)
        step_size = self.step_size * radius / self.radius if self.radius else None
        return replace(self, radius=radius, step_size=step_size)

    @property
    def metric_name(self) -> str:
        """Benchmark metric column of this attack, like ``pgd_8_255``."""
        return f"{self.kind.value}_{_in_255ths(self.radius)}_255"

    def __repr__(self):
        clamp = f" clamp={self.clamp}" if self.clamp else ''
        start = ' random_start' if self.random_start else ''
        return (f"AdversaryConfig({self.kind.value} {self.norm.value} ρ={_in_255ths(self.radius)}/255 "
                f"steps={self.steps} step={_in_255ths(self.step_size)}/255{clamp}{start})")


def _in_255ths(value: float) -> str:
    scaled = round(value * 255, 6)
    return str(int(scaled)) if scaled == int(scaled) else str(scaled)


def evaluation_presets() -> Dict[str, AdversaryConfig]:
    """
    Attacks of the benchmark's robust metrics, keyed by metric name (``fgsm_3_255``,
    ``pgd_3_255``, ``fgsm_8_255``, ``pgd_8_255``).
    """
    presets = {}
    for radius in EVALUATION_RADII:
        for kind in AttackKind:
            config = AdversaryConfig.evaluation_preset(radius, kind)
            presets[config.metric_name] = config
    return presets
