"""Tipos do dataset: um ensaio (TrialBundle) e um participante."""

from __future__ import annotations

from dataclasses import dataclass, field

from core.features import FeatureKind, FeatureSignal
from core.linear import SpeakerRole
from core.signals import MultiSignal
from utils.errors import ParameterError

LABELS = ("male", "female")


def other_label(label: str) -> str:
    return LABELS[1] if label == LABELS[0] else LABELS[0]


def protocol_label(index: int) -> str:
    """Falante atendido pelo protocolo: alterna a cada 4 ensaios, começando por 'male'."""
    return LABELS[((index - 1) // 4) % 2]


@dataclass(frozen=True)
class TrialBundle:
    index: int
    eeg: MultiSignal
    feat_attended: dict[FeatureKind, FeatureSignal]
    feat_ignored: dict[FeatureKind, FeatureSignal]
    attended_label: str

    def __post_init__(self):
        if self.attended_label not in LABELS:
            raise ParameterError(f"Rótulo atendido inválido: '{self.attended_label}'")
        n = len(self.eeg)
        for role, feats in (("atendido", self.feat_attended), ("ignorado", self.feat_ignored)):
            for kind, feat in feats.items():
                if len(feat) != n:
                    raise ParameterError(
                        f"Ensaio {self.index}: feature {kind.value} ({role}) com {len(feat)} amostras, EEG com {n}.")
                if feat.fs != self.eeg.fs:
                    raise ParameterError(f"Ensaio {self.index}: fs da feature difere do EEG.")

    @property
    def fs(self) -> float:
        return self.eeg.fs

    @property
    def n_samples(self) -> int:
        return len(self.eeg)

    @property
    def duration(self) -> float:
        return self.eeg.duration

    @property
    def kinds(self) -> tuple[FeatureKind, ...]:
        return tuple(k for k in FeatureKind if k in self.feat_attended and k in self.feat_ignored)

    def feature(self, role: SpeakerRole, kind: FeatureKind) -> FeatureSignal:
        if role is SpeakerRole.ATTENDED:
            return self.feat_attended[kind]
        if role is SpeakerRole.IGNORED:
            return self.feat_ignored[kind]
        raise ParameterError(f"Papel sem feature associada: {role.value}")

    def speaker_feature(self, label: str, kind: FeatureKind) -> FeatureSignal:
        """Feature do falante `label` (male/female), independentemente da atenção."""
        if label == self.attended_label:
            return self.feat_attended[kind]
        return self.feat_ignored[kind]


@dataclass
class Participant:
    name: str
    trials: list[TrialBundle] = field(default_factory=list)

    @property
    def n_trials(self) -> int:
        return len(self.trials)
