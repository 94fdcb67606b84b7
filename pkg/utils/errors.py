"""Hierarquia de exceções do pacote.

O código de biblioteca só levanta; quem captura e registra é o `main.py`.
"""

from __future__ import annotations

from pathlib import Path


class AadError(Exception):
    """Base de todos os erros do toolkit."""


class ParameterError(AadError, ValueError):
    """Parâmetro fora do domínio permitido."""


class LengthError(ParameterError):
    """Sinal curto demais para a operação pedida."""


class DegenerateSignalError(AadError):
    """Sinal constante (desvio padrão nulo)."""


class DegenerateCorrelationError(AadError):
    """Correlação indefinida: uma das entradas é constante."""


class SingularityError(AadError):
    """Sistema linear singular sem regularização."""


class AlignmentError(AadError):
    """Não há sobreposição válida para alinhar os sinais."""


class StateError(AadError):
    """Operação chamada no modo errado (ex.: gradiente em modo eval)."""


class TuningError(AadError):
    """Nenhum hiperparâmetro produziu um escore válido."""


class DegenerateClassifierError(AadError):
    """Classes com médias idênticas: não há direção discriminante."""


class DegenerateTestError(AadError):
    """Teste estatístico sem variância."""


class DegenerateBatchError(AadError):
    """Lote de treino com alvos constantes."""


class ConfigError(AadError):
    """Arquivo de configuração inválido."""


class IngestionError(AadError):
    """Arquivo do dataset ausente ou inconsistente."""

    def __init__(self, message: str, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            message = f"{message} [{self.path}]"
        super().__init__(message)
