"""Driving configurations and write/read scenarios of the tripod memory.

Each Schmidt mode is an independent channel: the only kernel datum a
scenario needs is ``lambda_i``. Per mode a Gaussian register holds the input
pulses, one pair of spin waves (either ``+/-`` or ``1/2``), the output pulses
and one vacuum ancilla per half-cycle.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import gaussian as gs
from .gaussian import (
    IN1,
    IN2,
    OUT1,
    OUT2,
    SPIN1,
    SPIN2,
    SPIN_MINUS,
    SPIN_PLUS,
    GaussianState,
    ModeLabel,
    QuadratureSpec,
)


class ScenarioError(ValueError):
    """Invalid write/read sequence."""


class DrivingConfig(enum.Enum):
    OMEGA1_ONLY = "Omega1Only"
    OMEGA2_ONLY = "Omega2Only"
    SYMMETRIC_PLUS = "SymmetricPlus"
    SYMMETRIC_MINUS = "SymmetricMinus"

    @property
    def rabi(self) -> tuple[float, float]:
        """``(Omega_1, Omega_2)`` in units of the common Rabi norm ``Omega``."""
        h = 1.0 / math.sqrt(2.0)
        return {
            DrivingConfig.OMEGA1_ONLY: (1.0, 0.0),
            DrivingConfig.OMEGA2_ONLY: (0.0, 1.0),
            DrivingConfig.SYMMETRIC_PLUS: (h, h),
            DrivingConfig.SYMMETRIC_MINUS: (h, -h),
        }[self]

    @classmethod
    def parse(cls, text: str) -> DrivingConfig:
        text = text.strip()
        aliases = {"1": cls.OMEGA1_ONLY, "2": cls.OMEGA2_ONLY, "+": cls.SYMMETRIC_PLUS, "-": cls.SYMMETRIC_MINUS}
        if text in aliases:
            return aliases[text]
        for member in cls:
            if text.lower() in (member.value.lower(), member.name.lower()):
                return member
        raise ValueError(f"unknown driving configuration {text!r}")


_WAVES = {
    DrivingConfig.OMEGA1_ONLY: "1",
    DrivingConfig.OMEGA2_ONLY: "2",
    DrivingConfig.SYMMETRIC_PLUS: "+",
    DrivingConfig.SYMMETRIC_MINUS: "-",
}
_WAVE_LABEL = {"1": SPIN1, "2": SPIN2, "+": SPIN_PLUS, "-": SPIN_MINUS}
_PARTNER = {"1": "2", "2": "1", "+": "-", "-": "+"}
_PM = (SPIN_PLUS, SPIN_MINUS)
_12 = (SPIN1, SPIN2)


def target_wave(cfg: DrivingConfig) -> str:
    """Spin wave ``'1'``, ``'2'``, ``'+'`` or ``'-'`` addressed by a driving configuration."""
    return _WAVES[cfg]


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    writes: tuple[tuple[str, DrivingConfig], ...]
    reads: tuple[DrivingConfig, ...]
    entangle_inputs: bool = False
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "writes", tuple((sid, DrivingConfig(c)) for sid, c in self.writes))
        object.__setattr__(self, "reads", tuple(DrivingConfig(c) for c in self.reads))
        if not 1 <= len(self.writes) <= 2:
            raise ScenarioError(f"{self.name}: need one or two writes, got {len(self.writes)}")
        if len(self.reads) > 2:
            raise ScenarioError(f"{self.name}: at most two reads, got {len(self.reads)}")
        waves = [target_wave(c) for _, c in self.writes]
        if len(waves) == 2:
            if waves[0] == waves[1]:
                raise ScenarioError(f"{self.name}: two writes into spin wave {waves[0]}")
            if _PARTNER[waves[0]] != waves[1]:
                raise ScenarioError(
                    f"{self.name}: second write must address the wave orthogonal to {waves[0]}, got {waves[1]}"
                )
        if len({sid for sid, _ in self.writes}) != len(self.writes):
            raise ScenarioError(f"{self.name}: an input pulse can only be written once")
        read_waves = [target_wave(c) for c in self.reads]
        if len(set(read_waves)) != len(read_waves):
            raise ScenarioError(f"{self.name}: spin wave {read_waves[0]} read twice")
        if self.entangle_inputs and len(self.writes) != 2:
            raise ScenarioError(f"{self.name}: entangled inputs need two writes")

    @property
    def input_ids(self) -> tuple[str, ...]:
        return tuple(sid for sid, _ in self.writes)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "writes": [{"input": sid, "driving": c.value} for sid, c in self.writes],
            "reads": [c.value for c in self.reads],
            "entangle_inputs": self.entangle_inputs,
        }


def parse_script(text: str, name: str = "custom") -> ScenarioScript:
    """Parse an inline script such as ``"write pulse1 +; write pulse2 -; read 1; read 2"``.

    Steps are separated by ``;``. ``entangle`` mixes the two inputs on a
    symmetric beam splitter before writing.
    """
    writes, reads, entangle = [], [], False
    for raw in text.split(";"):
        words = raw.split()
        if not words:
            continue
        op = words[0].lower()
        if op == "write" and len(words) == 3:
            writes.append((words[1], DrivingConfig.parse(words[2])))
        elif op == "read" and len(words) == 2:
            reads.append(DrivingConfig.parse(words[1]))
        elif op == "entangle" and len(words) == 1:
            entangle = True
        else:
            raise ScenarioError(f"cannot parse script step {raw.strip()!r}")
    return ScenarioScript(name, tuple(writes), tuple(reads), entangle_inputs=entangle)


def builtin_scenarios() -> dict[str, ScenarioScript]:
    plus, minus = DrivingConfig.SYMMETRIC_PLUS, DrivingConfig.SYMMETRIC_MINUS
    one, two = DrivingConfig.OMEGA1_ONLY, DrivingConfig.OMEGA2_ONLY
    two_writes = (("pulse1", plus), ("pulse2", minus))
    scripts = [
        ScenarioScript("S1", (("pulse1", plus),), (plus,), description="store and retrieve"),
        ScenarioScript("S2", (("pulse1", plus),), (one,), description="partial read, light-matter CQS"),
        ScenarioScript("S3", (("pulse1", plus),), (one, two), description="split into two semi-squeezed pulses"),
        ScenarioScript("S4", two_writes, (one, two), description="two-pulse entangler"),
        ScenarioScript("S5", two_writes, (plus, minus), description="two-pulse Mach-Zehnder identity"),
        ScenarioScript(
            "S6", two_writes, (one, two), entangle_inputs=True, description="entangled inputs, disentangling read"
        ),
    ]
    return {s.name: s for s in scripts}


@dataclass
class ModeReport:
    index: int
    lam: float
    write_efficiency: float | None
    inputs: dict[str, dict]
    spins_after_write: dict[str, dict]
    duan_after_write: dict[str, gs.DuanResult]
    outputs: dict[str, dict]
    spins_final: dict[str, dict]
    duan: dict[str, gs.DuanResult]
    min_symplectic_eigenvalue: float
    written: GaussianState = field(repr=False)
    final: GaussianState = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "i": self.index + 1,
            "lambda": self.lam,
            "write_efficiency": self.write_efficiency,
            "inputs": self.inputs,
            "spins_after_write": self.spins_after_write,
            "duan_after_write": {k: v.to_dict() for k, v in self.duan_after_write.items()},
            "outputs": self.outputs,
            "spins_final": self.spins_final,
            "duan": {k: v.to_dict() for k, v in self.duan.items()},
            "min_symplectic_eigenvalue": self.min_symplectic_eigenvalue,
        }


@dataclass
class ScenarioReport:
    name: str
    script: ScenarioScript
    modes: list[ModeReport]
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "script": self.script.to_dict(),
            "modes": [m.to_dict() for m in self.modes],
            "notes": list(self.notes),
        }

    def rows(self):
        """Long-format ``(mode, metric, value)`` rows, in deterministic order."""
        for m in self.modes:
            i = m.index + 1
            yield i, "lambda", m.lam
            if m.write_efficiency is not None:
                yield i, "write_efficiency", m.write_efficiency
            for group, entries in (("out", m.outputs), ("spin", m.spins_final)):
                for label, stats in entries.items():
                    for key, value in stats.items():
                        yield i, f"{group}.{label}.{key}", value
            for pair, res in m.duan.items():
                yield i, f"duan.{pair}", res.value
            for pair, res in m.duan_after_write.items():
                yield i, f"duan_after_write.{pair}", res.value
            yield i, "min_symplectic_eigenvalue", m.min_symplectic_eigenvalue


def _pair_key(a: ModeLabel, b: ModeLabel) -> str:
    return f"{a}|{b}"


def _spin_pair(state: GaussianState) -> tuple[ModeLabel, ModeLabel]:
    return _PM if SPIN_PLUS in state else _12


def _to_basis(state: GaussianState, wave: str) -> GaussianState:
    """Rotate the spin pair so that ``wave`` is an explicit mode."""
    want = _PM if wave in "+-" else _12
    have = _spin_pair(state)
    if have == want:
        return state
    return gs.rotate_pm_basis(state, have[0], have[1], as_labels=want)


def _duan_pairs(state: GaussianState, labels: Sequence[ModeLabel]) -> dict[str, gs.DuanResult]:
    out = {}
    for x in range(len(labels)):
        for y in range(x + 1, len(labels)):
            out[_pair_key(labels[x], labels[y])] = gs.duan(state, labels[x], labels[y])
    return out


def evaluate_mode(
    script: ScenarioScript, lam: float, inputs: Mapping[str, QuadratureSpec], index: int = 0
) -> ModeReport:
    """Run ``script`` on one Schmidt channel with eigenvalue ``lam``."""
    missing = [sid for sid in script.input_ids if sid not in inputs]
    if missing:
        raise ScenarioError(f"{script.name}: missing input spec(s) {missing}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam!r}")

    in_labels = [IN1, IN2][: len(script.writes)]
    first_wave = target_wave(script.writes[0][1])
    spins = _PM if first_wave in "+-" else _12
    state = gs.vacuum_register([*in_labels, *spins])
    for label, (sid, _) in zip(in_labels, script.writes):
        state = gs.set_mode(state, label, inputs[sid])
    if script.entangle_inputs:
        state = gs.rotate_pm_basis(state, IN1, IN2)

    input_stats = {str(lab): gs.mode_stats(state, lab) for lab in in_labels}
    n_loss = 0
    for label, (_, cfg) in zip(in_labels, script.writes):
        target = _WAVE_LABEL[target_wave(cfg)]
        state = gs.memory_half_cycle(state, label, target, lam, gs.loss(n_loss))
        n_loss += 1
    written = state

    write_eff = None
    if len(script.writes) == 1:
        n_in = input_stats[str(IN1)]["photon_number"]
        n_spin = gs.photon_number(written, _WAVE_LABEL[first_wave])
        write_eff = n_spin / n_in if n_in != 0 else math.nan

    spins_after, duan_after = {}, {}
    for view in (written, gs.rotate_pm_basis(written, *spins, as_labels=_12 if spins == _PM else _PM)):
        pair = _spin_pair(view)
        for lab in pair:
            spins_after[str(lab)] = gs.mode_stats(view, lab)
        duan_after[_pair_key(*pair)] = gs.duan(view, *pair)

    out_labels = [OUT1, OUT2][: len(script.reads)]
    consumed = set()
    for out, cfg in zip(out_labels, script.reads):
        wave = target_wave(cfg)
        before = _spin_pair(state)
        state = _to_basis(state, wave)
        if _spin_pair(state) != before:
            consumed.clear()
        state = gs.add_modes(state, [out])
        spin = _WAVE_LABEL[wave]
        state = gs.memory_half_cycle(state, spin, out, lam, gs.loss(n_loss))
        n_loss += 1
        consumed.add(spin)

    live_spins = [lab for lab in _spin_pair(state) if lab not in consumed]
    observed = out_labels + live_spins
    sym = state.symplectic_eigenvalues()
    return ModeReport(
        index=index,
        lam=float(lam),
        write_efficiency=write_eff,
        inputs=input_stats,
        spins_after_write=spins_after,
        duan_after_write=duan_after,
        outputs={str(lab): gs.mode_stats(state, lab) for lab in out_labels},
        spins_final={str(lab): gs.mode_stats(state, lab) for lab in live_spins},
        duan=_duan_pairs(state, observed),
        min_symplectic_eigenvalue=float(np.min(sym)),
        written=written,
        final=state,
    )


def run_scenario(script: ScenarioScript, basis, specs: Mapping) -> ScenarioReport:
    """Evaluate ``script`` on every retained Schmidt mode of ``basis``.

    ``specs`` maps input ids (``"pulse1"``, ``"pulse2"``) to
    :class:`~tripod_mzi.source.InputPulseSpec`.
    """
    missing = [sid for sid in script.input_ids if sid not in specs]
    if missing:
        raise ScenarioError(f"{script.name}: missing input spec(s) {missing}")
    modes = []
    for i, lam in enumerate(basis.lambdas):
        per_mode = {sid: specs[sid].mode(i) for sid in script.input_ids}
        modes.append(evaluate_mode(script, min(float(lam), 1.0), per_mode, index=i))
    notes = (
        "vacuum ancillas use the beam-splitter completion sqrt(1 - sqrt(lambda)); "
        "full variances of residual spin waves depend on this convention",
    )
    return ScenarioReport(script.name, script, modes, notes)


def efficiency(report: ScenarioReport, i: int) -> float:
    """Write efficiency of mode ``i``: spin photon number over input photon number."""
    if len(report.script.writes) != 1:
        raise ScenarioError("write efficiency is only defined for single-write scenarios")
    return report.modes[i].write_efficiency
