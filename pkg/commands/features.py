"""aad features: envelope auditivo ou de onsets a partir de um WAV."""

import logging
from pathlib import Path

from core.features import FeatureKind, auditory_envelope, make_gammatone_bank, onset_envelope
from core.signals import standardize
from database.database import read_wav, write_f32
from utils.logger import log_status

logger = logging.getLogger(__name__)


def run(args) -> int:
    audio = read_wav(args.audio)
    kind = FeatureKind.parse(args.kind)
    log_status(f"Extraindo {kind.short_name} de {args.audio} ({audio.duration:.1f} s @ {audio.fs:.0f} Hz)", "loading")
    envelope = auditory_envelope(audio, make_gammatone_bank(audio.fs), standardize_output=False)
    if kind is FeatureKind.ENVELOPE:
        feature = standardize(envelope.signal)
    else:
        feature = onset_envelope(envelope).signal
    out = Path(args.out) if args.out else Path(args.audio).with_name(f"{Path(args.audio).stem}_{kind.short_name}.f32")
    write_f32(out, feature.samples, fs=feature.fs, kind=kind.value, source=str(args.audio))
    log_status(f"{len(feature)} amostras @ {feature.fs:.0f} Hz gravadas em {out}", "success")
    return 0


def setup(subparsers):
    parser = subparsers.add_parser("features", help="Extrai uma feature de fala de um arquivo WAV")
    parser.add_argument("audio", help="Arquivo WAV")
    parser.add_argument("--kind", choices=("envelope", "onsets"), default="envelope")
    parser.add_argument("--out", help="Arquivo .f32 de saída")
    parser.set_defaults(handler=run)
