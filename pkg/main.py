import argparse
import importlib
import logging
import os
import sys
import traceback

from dotenv import load_dotenv

from utils.errors import AadError, IngestionError
from utils.logger import log_header, log_status, setup_logging

if sys.platform == 'win32':
    import ctypes
    ctypes.windll.kernel32.SetConsoleOutputCP(65001)

COMMANDS_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "commands")


def load_commands(subparsers) -> int:
    """Carrega cada módulo de commands/ e registra seu subcomando via setup()."""
    loaded = 0
    skipped = 0
    if not os.path.isdir(COMMANDS_DIR):
        logging.warning(f"Diretório de comandos '{COMMANDS_DIR}' não encontrado.")
        return 0

    for filename in sorted(os.listdir(COMMANDS_DIR)):
        if filename.endswith(".py") and not filename.startswith("_"):
            command_path = os.path.join(COMMANDS_DIR, filename)
            module_name = f"commands.{filename[:-3]}"
            try:
                if os.path.getsize(command_path) == 0:
                    logging.debug(f"Ignorado (vazio): {module_name}")
                    skipped += 1
                    continue
                module = importlib.import_module(module_name)
                if not hasattr(module, "setup"):
                    log_status(f"Sem ponto de entrada (setup): {module_name}", "error")
                    skipped += 1
                    continue
                module.setup(subparsers)
                logging.debug(f"Carregado: {module_name}")
                loaded += 1
            except ImportError as e:
                log_status(f"Falha ao importar {module_name}: {e}", "error")
                logging.error(f"Erro ao carregar {module_name}:\n{traceback.format_exc()}")
                skipped += 1
    logging.debug(f"Total carregado: {loaded} | Ignorados: {skipped}")
    return loaded


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aad", description="Decodificação de atenção auditiva com EEG de ouvido")
    parser.add_argument("--log-level", help="Nível de log (sobrepõe AAD_LOG_LEVEL)")
    subparsers = parser.add_subparsers(dest="command", metavar="<comando>")
    load_commands(subparsers)
    return parser


def main(argv=None) -> int:
    load_dotenv()
    level = None
    if argv is None:
        argv = sys.argv[1:]
    if "--log-level" in argv:
        i = argv.index("--log-level")
        level = argv[i + 1] if i + 1 < len(argv) else None
    setup_logging(level=level)

    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "handler", None):
        parser.print_help()
        return 1

    log_header(f"aad {args.command}", nivel=logging.getLevelName(logging.getLogger().level))
    try:
        return args.handler(args)
    except IngestionError as e:
        log_status(f"Erro de dados: {e}", "error")
        return 1
    except AadError as e:
        log_status(f"{type(e).__name__}: {e}", "error")
        return 1
    except KeyboardInterrupt:
        log_status("Interrompido pelo usuário (Ctrl+C).", "warning")
        return 130
    except Exception as e:
        log_status(f"ERRO FATAL: {type(e).__name__} - {str(e)}", "error")
        logging.critical(f"Erro não tratado:\n{traceback.format_exc()}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
