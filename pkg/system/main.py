# -*- coding: utf-8 -*-
"""
system/main.py
Командная строка пайплайна OD-оценки.

Примеры (из корня репозитория):
    python -m system.main gen-network --kind lax --out output/lax.json
    python -m system.main --seed 7 gen-obs --network output/lax.json --out output/obs.csv
    python -m system.main build-dataset --network output/lax.json --obs output/obs.csv --out output/dataset.csv
    python -m system.main --seed 7 train --dataset output/dataset.csv --out output/model.json
    python -m system.main eval-loop --network output/lax.json --dataset output/dataset.csv --model output/model.json --day 29
"""

import argparse
import os
import sys
from typing import List, Optional

import numpy as np

from analysis.baselines import MeanBaseline, OracleModel, ZeroBaseline
from analysis.dta import DtaParams, run_dta, save_assignment
from analysis.neural import NNTrainer, TrainConfig, evaluate_nn, load_model, save_model
from analysis.odgen import ODGenerator, build_zero_mask
from analysis.scenario import apply_scenario, load_scenario
from analysis.synthetic import SyntheticDemandProfile, demo_network, generate_lax_network, generate_synthetic_observations
from core.demand_io import load_dataset, load_observations, load_od, save_dataset, save_observations, save_od
from core.network_io import load_network, save_network
from infra.error_handler import ODEstimationError
from infra.logger import get_logger
from reporting.exporter import ReportExporter
from reporting.formatter import ReportFormatter
from system import config
from system.pipeline import build_dataset, closed_loop_eval


logger = get_logger()


# ---------- Подкоманды ----------

def cmd_gen_network(args, settings) -> int:
    net = demo_network() if args.kind == "demo" else generate_lax_network(settings["NETWORK"])
    print(save_network(net, args.out))
    return 0


def cmd_gen_obs(args, settings) -> int:
    net = load_network(args.network)
    profile = SyntheticDemandProfile.from_settings(net, settings["PIPELINE"], seed=args.seed, days=args.days)
    observations = generate_synthetic_observations(net, profile)
    print(save_observations(observations, args.out))
    return 0


def cmd_gen_od(args, settings) -> int:
    net = load_network(args.network)
    observations = load_observations(args.obs)
    if args.hour is not None:
        observations = [o for o in observations if o.hour_index == args.hour]
    generator = ODGenerator(settings["ODGEN"])
    os.makedirs(args.out_dir, exist_ok=True)
    for obs in observations:
        solution = generator.generate(net, obs, expect_feasible=args.expect_feasible)
        path = save_od(solution.od, os.path.join(args.out_dir, f"od_hour_{obs.hour_index:04d}.csv"))
        print(f"{path}\tцель={solution.objective:.3e}\tитераций={solution.iterations}")
    return 0


def cmd_run_dta(args, settings) -> int:
    net = load_network(args.network)
    od = load_od(args.od, build_zero_mask(net.zones))
    params = DtaParams.from_settings(settings["DTA"])
    result = run_dta(net, od, params)
    print(save_assignment(result, params, args.out))
    return 0


def cmd_build_dataset(args, settings) -> int:
    net = load_network(args.network)
    dataset = build_dataset(net, load_observations(args.obs), settings, expect_feasible=args.expect_feasible)
    print(save_dataset(dataset, args.out))
    return 0


def cmd_train(args, settings) -> int:
    dataset = load_dataset(args.dataset)
    cfg = TrainConfig.from_settings(settings["TRAIN"], seed=args.seed)
    model, trace = NNTrainer(settings["NN"], cfg).train(dataset)
    logger.info(f"Обучение завершено: loss {trace[0]:.4f} → {trace[-1]:.4f}")
    print(save_model(model, args.out, seed=cfg.seed))
    return 0


def cmd_eval_nn(args, settings) -> int:
    dataset = load_dataset(args.dataset)
    model = load_model(args.model, n_free=dataset.targets.shape[1])
    x, y = dataset.test_part()
    report = evaluate_nn(model, x, y)
    baseline = evaluate_nn(MeanBaseline.fit(dataset.train_part()[1]), x, y)
    print(f"MSE_NN={report.mse:.4f}\tRMSE_NN={report.rmse:.4f}\trRMSE_NN={report.rrmse:.2f}%")
    print(f"baseline_mean: MSE={baseline.mse:.4f}\tRMSE={baseline.rmse:.4f}\trRMSE={baseline.rrmse:.2f}%")
    if report.note:
        print(report.note)
    return 0


def _pick_model(choice: str, dataset, n_free: int):
    if choice == "mean":
        return MeanBaseline.fit(dataset.train_part()[1])
    if choice == "zero":
        return ZeroBaseline(n_free)
    if choice == "oracle":
        return OracleModel(dataset.inputs, dataset.targets)
    return load_model(choice, n_free=n_free)


def cmd_eval_loop(args, settings) -> int:
    net = load_network(args.network)
    dataset = load_dataset(args.dataset)
    n_free = int((~build_zero_mask(net.zones)).sum())
    model = _pick_model(args.model, dataset, n_free)

    rows = np.nonzero(dataset.hours // 24 == args.day)[0]
    if rows.size == 0:
        raise ODEstimationError(f"В датасете нет часов для суток {args.day}")
    report = closed_loop_eval(net, model, dataset.inputs[rows], hours=dataset.hours[rows].tolist(), settings=settings)

    exporter = ReportExporter(args.out_dir)
    print(exporter.export_csv(report.frame, "metrics.csv"))
    md = ReportFormatter().format_report({
        "report": report.frame,
        "grouping": report.grouping,
        "model": args.model,
        "network": os.path.basename(args.network),
        "day": args.day,
        "unconverged": [h for h, ok in zip(report.hours, report.converged) if not ok],
    })
    print(exporter.export_markdown(md, "report.md"))
    if args.pdf:
        print(exporter.export_pdf(md, "report.pdf"))
    return 0


def cmd_scenario(args, settings) -> int:
    net = load_network(args.network)
    transform = load_scenario(args.scenario)
    modified = apply_scenario(net, transform)
    print(save_network(modified, args.out))
    if args.od:
        od = load_od(args.od, build_zero_mask(net.zones))
        params = DtaParams.from_settings(settings["DTA"])
        before, after = run_dta(net, od, params), run_dta(modified, od, params)
        print(f"mean_route_cost: до {before.mean_route_cost:.3f}, после {after.mean_route_cost:.3f}")
        for lid in transform.targets:
            print(f"link {lid}: время {before.link_travel_times[lid]:.3f} → {after.link_travel_times[lid]:.3f}")
    return 0


# ---------- Разбор аргументов ----------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="od-estimation", description="Оценка OD-матриц: генерация, DTA, нейросеть")
    parser.add_argument("--seed", type=int, default=None, help="зерно всех случайных компонент")
    parser.add_argument("--config", default=None, help="JSON с переопределениями параметров")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-network", help="сеть: демонстрационная или масштаба аэропорта")
    p.add_argument("--kind", choices=("demo", "lax"), default="lax")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_network)

    p = sub.add_parser("gen-obs", help="синтетические наблюдения на границах")
    p.add_argument("--network", required=True)
    p.add_argument("--days", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_obs)

    p = sub.add_parser("gen-od", help="допустимые OD-матрицы по наблюдениям")
    p.add_argument("--network", required=True)
    p.add_argument("--obs", required=True)
    p.add_argument("--hour", type=int, default=None)
    p.add_argument("--expect-feasible", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_od)

    p = sub.add_parser("run-dta", help="распределение OD-матрицы по сети")
    p.add_argument("--network", required=True)
    p.add_argument("--od", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run_dta)

    p = sub.add_parser("build-dataset", help="датасет потоки → OD")
    p.add_argument("--network", required=True)
    p.add_argument("--obs", required=True)
    p.add_argument("--expect-feasible", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="обучение нейросети")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-nn", help="ошибка нейросети на тестовой выборке")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_eval_nn)

    p = sub.add_parser("eval-loop", help="замкнутая оценка за сутки")
    p.add_argument("--network", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True, help="путь к чекпоинту или mean / zero / oracle")
    p.add_argument("--day", type=int, default=0)
    p.add_argument("--out-dir", default=config.REPORTS_DIR)
    p.add_argument("--pdf", action="store_true")
    p.set_defaults(func=cmd_eval_loop)

    p = sub.add_parser("scenario", help="применить сценарий к сети")
    p.add_argument("--network", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--od", default=None, help="OD-матрица для сравнения до/после")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = config.load_settings(args.config)
        if args.seed is not None:
            settings["TRAIN"]["seed"] = args.seed
            settings["PIPELINE"]["seed"] = args.seed
        logger.set_correlation_id(f"{args.command}-{args.seed if args.seed is not None else 'default'}")
        logger.info(f"=== Старт: {args.command} ===")
        code = args.func(args, settings)
        logger.status(f"{args.command} завершено", status="ok")
        return code
    except (ODEstimationError, OSError, ValueError) as e:
        print(f"ошибка: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
