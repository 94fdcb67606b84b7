"""aad synth: gera um dataset sintético com verdade plantada."""

import logging

from database.database import save_dataset
from handlers.synth import SynthConfig, gen_dataset
from utils.logger import log_status

logger = logging.getLogger(__name__)


def run(args) -> int:
    config = SynthConfig(participants=args.participants, trials=args.trials, duration=args.duration,
                         g_att=args.g_att, g_ign=args.g_ign, snr_db=args.snr, seed=args.seed,
                         onset_gain=args.onset_gain, pink_noise=args.pink)
    log_status(f"Gerando {config.participants} participantes sintéticos (semente {config.seed})...", "loading")
    participants, truth = gen_dataset(config)
    save_dataset(args.out, participants, truth)
    log_status(f"Dataset sintético gravado em {args.out}", "success")
    return 0


def setup(subparsers):
    parser = subparsers.add_parser("synth", help="Gera um dataset sintético")
    parser.add_argument("--participants", type=int, default=18)
    parser.add_argument("--trials", type=int, default=16)
    parser.add_argument("--duration", type=float, default=150.0, help="Duração de cada ensaio (s)")
    parser.add_argument("--g-att", type=float, default=1.0)
    parser.add_argument("--g-ign", type=float, default=0.5)
    parser.add_argument("--snr", type=float, default=-5.0, help="SNR em dB")
    parser.add_argument("--onset-gain", type=float, default=0.0)
    parser.add_argument("--pink", action="store_true", help="Ruído 1/f em vez de branco")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="Diretório de saída")
    parser.set_defaults(handler=run)
