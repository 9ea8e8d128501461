"""Command-line entry points for the experiment harness.

Exit codes: 0 success, 1 spec/parse error, 2 numerical failure, 3 partial run
(some cells flagged).
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from .asymptotics import RegimeError
from .harness import (
    CGMT_TABLE,
    ETA_SWEEP,
    INHOMO_CURVE,
    LOWDIM_LOGISTIC,
    PHASE_HEATMAP,
    PROJECTOR_DIAGNOSTICS,
    ExperimentSpec,
    FeatureParseError,
    ResultTable,
    SpecError,
    run_experiment,
)
from .numerics import BracketError, DomainError
from .trainer import TrainingDivergedError

_SUBCOMMANDS = {
    "phase-heatmap": PHASE_HEATMAP,
    "eta-sweep": ETA_SWEEP,
    "cgmt-table": CGMT_TABLE,
    "inhomo-curve": INHOMO_CURVE,
    "lowdim-logistic": LOWDIM_LOGISTIC,
    "diagnose-features": PROJECTOR_DIAGNOSTICS,
}


def _default_grid(kind: str, args) -> dict:
    if kind == PHASE_HEATMAP:
        taus = [float(t) for t in np.logspace(math.log10(0.3), math.log10(20.0), 10)]
        return {"tau": taus, "sigma_aug": [0.5, 1.0],
                "n": 2000, "p": 50, "mu_norm": 5.0}
    if kind == ETA_SWEEP:
        return {"eta": [0.0, 1.0, 2.0, 4.0], "rho": [3.0], "p": [2000], "n": 1000}
    if kind == CGMT_TABLE:
        return {"delta": [0.1, 0.25, 0.5, 1.0, 2.0],
                "rho": [1.0, 2.0, 3.0, 5.0],
                "eta": [0.0, 1.0, 2.0, 4.0]}
    if kind == INHOMO_CURVE:
        return {"tau": [0.5, 1.0, 2.0, 3.0, 6.0, 10.0],
                "n": 2000, "p": 100, "mu_norm": 4.0,
                "sigma_aug": 0.5, "rho_aug": 5.0, "r": 0.5,
                "epochs": 300, "step_size": 0.2}
    if kind == LOWDIM_LOGISTIC:
        n = 20000
        return {"eta": [-0.5, 0.0, 2.0],
                "lambda": [0.0, 1.0, 0.5 * math.sqrt(n), float(n)],
                "n": n, "p": 10, "mu_norm": 1.0}
    if kind == PROJECTOR_DIAGNOSTICS:
        if args.features is None:
            raise SpecError("diagnose-features needs --features or --config")
        return {"tau": [1.0], "sigma_aug": [0.5],
                "input_path": args.features, "label_column": args.label_column}
    raise SpecError(f"no default grid for {kind}")


def _default_seeds(kind: str) -> tuple:
    if kind == ETA_SWEEP:
        return tuple(range(10))
    if kind == LOWDIM_LOGISTIC:
        return tuple(range(5))
    return (0,)


def _build_spec(kind: str, args) -> ExperimentSpec:
    if args.config is not None:
        spec = ExperimentSpec.from_json(args.config)
        if spec.kind != kind:
            raise SpecError(
                f"config kind {spec.kind!r} does not match subcommand ({kind})")
    else:
        spec = ExperimentSpec(kind=kind, grid=_default_grid(kind, args),
                              seeds=_default_seeds(kind), output_dir=Path("."))
    if args.seed is not None:
        spec = dataclasses.replace(spec, seeds=(args.seed,))
    if args.out is not None:
        spec = dataclasses.replace(spec, output_dir=Path(args.out))
    return spec


def _render_plot(kind: str, table: ResultTable, path: Path) -> bool:
    try:
        import matplotlib
    except ImportError:
        print("plot skipped: matplotlib is not installed "
              "(pip install 'artifact[plot]')", file=sys.stderr)
        return False
    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    cols = table.columns
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if kind == PHASE_HEATMAP:
        taus = sorted(set(cols["tau"]))
        sigmas = sorted(set(cols["sigma_aug"]))
        grid = np.full((len(sigmas), len(taus)), np.nan)
        for t, s, T in zip(cols["tau"], cols["sigma_aug"], cols["T_empirical"]):
            grid[sigmas.index(s), taus.index(t)] = T
        im = ax.imshow(grid, aspect="auto", origin="lower", vmin=0.0, vmax=1.0)
        ax.set_xticks(range(len(taus)), [f"{t:.2g}" for t in taus])
        ax.set_yticks(range(len(sigmas)), [f"{s:g}" for s in sigmas])
        ax.set_xlabel("temperature")
        ax.set_ylabel("augmentation std")
        fig.colorbar(im, ax=ax, label="trained alignment")
    elif kind == INHOMO_CURVE:
        order = np.argsort(cols["tau"])
        taus = np.asarray(cols["tau"])[order]
        ax.plot(taus, np.asarray(cols["T_theory"])[order], "--", label="theory")
        ax.plot(taus, np.asarray(cols["T_empirical"])[order], "o", label="trained")
        ax.set_xlabel("temperature")
        ax.set_ylabel("signal alignment")
        ax.legend()
    else:
        x_key, y_key, group_keys = {
            ETA_SWEEP: ("eta", "err_empirical", ("p", "rho")),
            CGMT_TABLE: ("delta", "predicted_error", ("rho", "eta")),
            LOWDIM_LOGISTIC: ("eta", "err_empirical", ("lambda",)),
            PROJECTOR_DIAGNOSTICS: ("sv_index", "mu_score_cum", ("tau",)),
        }[kind]
        groups: dict = {}
        for i in range(table.n_rows):
            key = tuple(cols[g][i] for g in group_keys)
            groups.setdefault(key, {}).setdefault(cols[x_key][i], []).append(
                cols[y_key][i])
        for key, by_x in sorted(groups.items()):
            xs = sorted(by_x)
            means = [float(np.nanmean(by_x[x])) for x in xs]
            label = ", ".join(f"{g}={v:g}" for g, v in zip(group_keys, key))
            ax.plot(xs, means, marker="o", label=label)
        ax.set_xlabel(x_key)
        ax.set_ylabel(y_key)
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return True


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contraproj",
        description="Seeded experiments for linear projection heads on "
                    "two-component Gaussian mixtures.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        sp = sub.add_parser(name, help=f"run the {name.replace('-', ' ')} experiment")
        sp.add_argument("--config", type=Path, default=None,
                        help="JSON experiment spec (default: built-in grid)")
        sp.add_argument("--seed", type=int, default=None,
                        help="replace the spec's seed list with this one seed")
        sp.add_argument("--out", type=Path, default=None,
                        help="output directory (default: spec's, or cwd)")
        sp.add_argument("--jobs", type=int, default=1,
                        help="number of worker processes (default 1)")
        sp.add_argument("--plot", action="store_true",
                        help="also render an SVG plot next to the CSV")
        if name == "diagnose-features":
            sp.add_argument("--features", type=str, default=None,
                            help="feature CSV with a label column")
            sp.add_argument("--label-column", type=str, default="label",
                            help="name of the label column (default 'label')")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    kind = _SUBCOMMANDS[args.command]
    try:
        spec = _build_spec(kind, args)
        table = run_experiment(spec, jobs=max(1, args.jobs))
        spec.output_dir.mkdir(parents=True, exist_ok=True)
        stem = args.command.replace("-", "_")
        csv_path = spec.output_dir / f"{stem}.csv"
        table.write_csv(csv_path)
        print(f"wrote {csv_path} ({table.n_rows} rows)")
        if args.plot:
            svg_path = spec.output_dir / f"{stem}.svg"
            if _render_plot(kind, table, svg_path):
                print(f"wrote {svg_path}")
    except (SpecError, FeatureParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, BracketError, RegimeError, TrainingDivergedError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    if table.flagged_rows:
        print(f"{len(table.flagged_rows)} flagged rows "
              f"(indices {table.flagged_rows})", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
