"""Persistência em disco: payloads .f32 (little-endian) com sidecar JSON, datasets e modelos."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

from core.features import FeatureKind, FeatureSignal
from core.linear import BackwardModel, LagSpec, SpeakerRole, Trf
from core.signals import ANALYSIS_FS, MultiSignal, Signal, preprocess_eeg, resample, standardize
from database.models import LABELS, Participant, TrialBundle
from utils.errors import IngestionError

logger = logging.getLogger(__name__)

# --- Configurações ---
PAYLOAD_DTYPE = np.dtype("<f4")
MANIFEST_FILE = "manifest.json"
TRUTH_FILE = "truth.json"
FORMAT_VERSION = 1


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def _ensure_dir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IngestionError(f"Não foi possível criar o diretório: {e}", path) from e


def write_json(path: str | Path, payload: dict[str, Any]) -> None:
    path = Path(path)
    _ensure_dir(path.parent)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, ensure_ascii=False, sort_keys=True)


def read_json(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise IngestionError("Arquivo não encontrado", path) from e
    except json.JSONDecodeError as e:
        raise IngestionError(f"JSON inválido: {e}", path) from e


def write_f32(path: str | Path, array, **meta) -> Path:
    """Grava `array` como float32 little-endian em `path` (.f32) e metadados no .json ao lado."""
    path = Path(path).with_suffix(".f32")
    values = np.asarray(array, dtype=np.float64)
    _ensure_dir(path.parent)
    values.astype(PAYLOAD_DTYPE).tofile(path)
    write_json(_sidecar(path), {"shape": list(values.shape), "dtype": "float32-le", **meta})
    return path


def read_f32(path: str | Path) -> tuple[np.ndarray, dict[str, Any]]:
    path = Path(path).with_suffix(".f32")
    meta = read_json(_sidecar(path))
    shape = meta.get("shape")
    if not isinstance(shape, list) or not all(isinstance(s, int) and s >= 0 for s in shape):
        raise IngestionError(f"Sidecar sem 'shape' válido: {shape!r}", _sidecar(path))
    if not path.exists():
        raise IngestionError("Payload não encontrado", path)
    data = np.fromfile(path, dtype=PAYLOAD_DTYPE)
    expected = int(np.prod(shape)) if shape else 1
    if data.size != expected:
        raise IngestionError(f"Payload com {data.size} valores; sidecar declara {expected}", path)
    data = data.astype(np.float64).reshape(shape)
    if not np.all(np.isfinite(data)):
        raise IngestionError("Payload contém NaN/Inf", path)
    return data, meta


def write_bundle(stem: str | Path, header: dict[str, Any], arrays: dict[str, np.ndarray]) -> Path:
    """Vários arrays num único .f32; o sidecar guarda offsets e formas."""
    layout, offset, flat = {}, 0, []
    for name, array in arrays.items():
        array = np.asarray(array, dtype=np.float64)
        layout[name] = {"offset": offset, "shape": list(array.shape)}
        offset += array.size
        flat.append(array.ravel())
    payload = np.concatenate(flat) if flat else np.zeros(0)
    return write_f32(stem, payload, header=header, arrays=layout, version=FORMAT_VERSION)


def read_bundle(stem: str | Path) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    payload, meta = read_f32(stem)
    try:
        arrays = {name: payload[spec["offset"]:spec["offset"] + int(np.prod(spec["shape"]))].reshape(spec["shape"])
                  for name, spec in meta["arrays"].items()}
        return meta["header"], arrays
    except (KeyError, TypeError, ValueError) as e:
        raise IngestionError(f"Layout de arrays inválido: {e}", _sidecar(Path(stem).with_suffix(".f32"))) from e


# --- Dataset ---

def _feature_stem(trial_dir: Path, index: int, role: SpeakerRole, kind: FeatureKind) -> Path:
    return trial_dir / f"trial{index:02d}_{role.value}_{kind.short_name}"


def _eeg_stem(trial_dir: Path, index: int) -> Path:
    return trial_dir / f"trial{index:02d}_eeg"


def save_participant(root: str | Path, participant: Participant) -> Path:
    folder = Path(root) / participant.name
    _ensure_dir(folder)
    entries = []
    for trial in participant.trials:
        write_f32(_eeg_stem(folder, trial.index), trial.eeg.data, fs=trial.fs, channels=list(trial.eeg.channels))
        for role in (SpeakerRole.ATTENDED, SpeakerRole.IGNORED):
            for kind in trial.kinds:
                feat = trial.feature(role, kind)
                write_f32(_feature_stem(folder, trial.index, role, kind), feat.samples, fs=feat.fs, kind=kind.value)
        entries.append({"index": trial.index, "attended": trial.attended_label,
                        "samples": trial.n_samples, "fs": trial.fs})
    write_json(folder / MANIFEST_FILE, {"participant": participant.name, "version": FORMAT_VERSION, "trials": entries})
    logger.debug(f"Participante {participant.name} salvo em {folder} ({len(entries)} ensaios).")
    return folder


def _load_eeg(stem: Path) -> MultiSignal:
    data, meta = read_f32(stem)
    if data.ndim != 2:
        raise IngestionError(f"EEG deve ser canais x amostras, veio {data.shape}", stem.with_suffix(".f32"))
    channels = tuple(meta.get("channels") or (f"ch{i}" for i in range(data.shape[0])))
    try:
        eeg = MultiSignal(channels, data, float(meta["fs"]))
    except (KeyError, ValueError) as e:
        raise IngestionError(f"EEG inválido: {e}", stem.with_suffix(".f32")) from e
    if eeg.fs != ANALYSIS_FS:
        logger.info(f"EEG a {eeg.fs} Hz em {stem.name}; aplicando pré-processamento para {ANALYSIS_FS:.0f} Hz.")
        eeg = preprocess_eeg(eeg)
    return eeg


def _load_feature(stem: Path, kind: FeatureKind) -> FeatureSignal:
    data, meta = read_f32(stem)
    if data.ndim != 1:
        raise IngestionError(f"Feature deve ser 1-D, veio {data.shape}", stem.with_suffix(".f32"))
    try:
        signal = Signal(data, float(meta["fs"]))
    except (KeyError, ValueError) as e:
        raise IngestionError(f"Feature inválida: {e}", stem.with_suffix(".f32")) from e
    if signal.fs != ANALYSIS_FS:
        signal = resample(signal, ANALYSIS_FS)
    return FeatureSignal(standardize(signal), kind, True)


def _trim(signal, n: int):
    if isinstance(signal, MultiSignal):
        return signal if len(signal) == n else signal.with_data(signal.data[:, :n])
    if len(signal) == n:
        return signal
    return FeatureSignal(signal.signal.with_samples(signal.samples[:n]), signal.kind, signal.standardized)


def load_participant(folder: str | Path, kinds=tuple(FeatureKind)) -> Participant:
    folder = Path(folder)
    manifest = read_json(folder / MANIFEST_FILE)
    try:
        name = str(manifest.get("participant", folder.name))
        entries = list(manifest["trials"])
    except (KeyError, TypeError) as e:
        raise IngestionError(f"Manifesto sem lista 'trials': {e}", folder / MANIFEST_FILE) from e
    trials = []
    for entry in entries:
        try:
            index, label = int(entry["index"]), str(entry["attended"])
        except (KeyError, TypeError, ValueError) as e:
            raise IngestionError(f"Entrada de ensaio inválida {entry!r}", folder / MANIFEST_FILE) from e
        if label not in LABELS:
            raise IngestionError(f"Ensaio {index}: rótulo '{label}' fora de {LABELS}", folder / MANIFEST_FILE)
        eeg = _load_eeg(_eeg_stem(folder, index))
        feats = {role: {kind: _load_feature(_feature_stem(folder, index, role, kind), kind) for kind in kinds}
                 for role in (SpeakerRole.ATTENDED, SpeakerRole.IGNORED)}
        lengths = [len(eeg)] + [len(f) for by_kind in feats.values() for f in by_kind.values()]
        if max(lengths) - min(lengths) > 1:
            raise IngestionError(f"Ensaio {index}: comprimentos inconsistentes {lengths}", _eeg_stem(folder, index))
        n = min(lengths)
        trials.append(TrialBundle(
            index, _trim(eeg, n),
            {k: _trim(f, n) for k, f in feats[SpeakerRole.ATTENDED].items()},
            {k: _trim(f, n) for k, f in feats[SpeakerRole.IGNORED].items()},
            label))
    if not trials:
        raise IngestionError("Participante sem ensaios", folder / MANIFEST_FILE)
    trials.sort(key=lambda t: t.index)
    return Participant(name, trials)


def save_dataset(root: str | Path, participants: list[Participant], truth: dict[str, Any] | None = None) -> Path:
    root = Path(root)
    _ensure_dir(root)
    for participant in participants:
        save_participant(root, participant)
    if truth is not None:
        write_json(root / TRUTH_FILE, truth)
    logger.info(f"Dataset salvo em {root} ({len(participants)} participantes).")
    return root


def participant_dirs(root: str | Path) -> list[Path]:
    root = Path(root)
    if not root.is_dir():
        raise IngestionError("Diretório do dataset não encontrado", root)
    dirs = sorted(p for p in root.iterdir() if p.is_dir() and (p / MANIFEST_FILE).exists())
    if not dirs:
        raise IngestionError(f"Nenhum participante ({MANIFEST_FILE}) encontrado", root)
    return dirs


def load_dataset(root: str | Path, kinds=tuple(FeatureKind)) -> list[Participant]:
    participants = [load_participant(d, kinds) for d in participant_dirs(root)]
    logger.info(f"Dataset {root}: {len(participants)} participantes carregados.")
    return participants


def load_truth(root: str | Path) -> dict[str, Any] | None:
    path = Path(root) / TRUTH_FILE
    return read_json(path) if path.exists() else None


# --- Modelos ---

def _lags_header(lags: LagSpec) -> list:
    return [lags.lag_min, lags.lag_max, lags.fs]


def _lags_from(raw) -> LagSpec:
    return LagSpec(int(raw[0]), int(raw[1]), float(raw[2]))


def _check_type(header: dict, expected: str, stem) -> None:
    if header.get("type") != expected:
        raise IngestionError(f"Esperado modelo '{expected}', encontrado '{header.get('type')}'", stem)


def save_backward(stem: str | Path, model: BackwardModel) -> Path:
    header = {"type": "backward", "lam": model.lam, "lags": _lags_header(model.lags),
              "channels": list(model.channels), "kind": model.kind.value, "role": model.role.value}
    return write_bundle(stem, header, {"weights": model.weights})


def load_backward(stem: str | Path) -> BackwardModel:
    header, arrays = read_bundle(stem)
    _check_type(header, "backward", stem)
    return BackwardModel(arrays["weights"], float(header["lam"]), _lags_from(header["lags"]),
                         tuple(header["channels"]), FeatureKind(header["kind"]), SpeakerRole(header["role"]))


def save_trf(stem: str | Path, trf: Trf) -> Path:
    header = {"type": "trf", "lags": _lags_header(trf.lags), "channels": list(trf.channels),
              "kind": trf.kind.value, "role": trf.role.value}
    return write_bundle(stem, header, {"coefficients": trf.coefficients})


def load_trf(stem: str | Path) -> Trf:
    header, arrays = read_bundle(stem)
    _check_type(header, "trf", stem)
    return Trf(arrays["coefficients"], _lags_from(header["lags"]), tuple(header["channels"]),
               FeatureKind(header["kind"]), SpeakerRole(header["role"]))


def save_cca(stem: str | Path, model, lda) -> Path:
    header = {"type": "cca", "shrinkage": model.shrinkage, "eeg_lags": _lags_header(model.eeg_lags),
              "feature_lags": _lags_header(model.feature_lags), "channels": list(model.channels),
              "kind": model.kind.value if model.kind else None, "lda_bias": lda.bias}
    arrays = {"wx": model.wx, "wy": model.wy, "rho": model.rho, "mean_x": model.mean_x,
              "mean_y": model.mean_y, "lda_weights": lda.weights}
    return write_bundle(stem, header, arrays)


def load_cca(stem: str | Path):
    from core.cca import CcaModel, LdaClassifier

    header, arrays = read_bundle(stem)
    _check_type(header, "cca", stem)
    model = CcaModel(arrays["wx"], arrays["wy"], arrays["rho"], arrays["mean_x"], arrays["mean_y"],
                     float(header["shrinkage"]), _lags_from(header["eeg_lags"]), _lags_from(header["feature_lags"]),
                     tuple(header["channels"]), FeatureKind(header["kind"]) if header["kind"] else None)
    return model, LdaClassifier(arrays["lda_weights"], float(header["lda_bias"]))


def save_cnn(stem: str | Path, decoder) -> Path:
    model = decoder.model
    header = {"type": "cnn", "kernel": model.hyper.kernel, "blocks": model.hyper.blocks, "width": model.width,
              "channels": list(decoder.channels), "kind": decoder.kind.value,
              "validation_rho": decoder.validation_rho}
    arrays = {name: tensor.detach().cpu().double().numpy() for name, tensor in model.state_dict().items()}
    return write_bundle(stem, header, arrays)


def load_cnn(stem: str | Path):
    import torch

    from core.cnn import CnnDecoder, CnnHyper, CnnModel

    header, arrays = read_bundle(stem)
    _check_type(header, "cnn", stem)
    model = CnnModel(CnnHyper(int(header["kernel"]), int(header["blocks"])), width=int(header["width"]))
    state = model.state_dict()
    try:
        model.load_state_dict({name: torch.as_tensor(arrays[name]).to(state[name].dtype) for name in state})
    except KeyError as e:
        raise IngestionError(f"Checkpoint sem o tensor {e}", stem) from e
    model.eval()
    return CnnDecoder(model, FeatureKind(header["kind"]), tuple(header["channels"]), float(header["validation_rho"]))


def results_dir(path: str | Path) -> Path:
    path = Path(path)
    _ensure_dir(path)
    return path


def read_wav(path: str | Path) -> Signal:
    """Áudio WAV em mono (média dos canais), amostras em ponto flutuante."""
    from scipy.io import wavfile

    path = Path(path)
    try:
        fs, data = wavfile.read(path)
    except FileNotFoundError as e:
        raise IngestionError("Arquivo de áudio não encontrado", path) from e
    except ValueError as e:
        raise IngestionError(f"WAV ilegível: {e}", path) from e
    if np.issubdtype(data.dtype, np.integer):
        info = np.iinfo(data.dtype)
        data = (data.astype(np.float64) - (info.max + info.min + 1) / 2) / (info.max + 1)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.size == 0:
        raise IngestionError("Áudio vazio", path)
    return Signal(data, float(fs))
