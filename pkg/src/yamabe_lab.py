from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple
import argparse
import json
import logging
import os
import sys

import numpy as np
import pandas as pd
import pydantic
import scipy
from pydantic import ValidationError

from continuation.audit_suite import AuditSuite
from continuation.audits import certify_mu1
from continuation.continuation import ContinuationDriver
from continuation.exterior import q_at_infinity
from continuation.verdict import decide_existence
from data_classes.config import LabArgs
from data_classes.results import TRACE_COLUMNS
from discretize.assembly import assemble
from discretize.grid import build_grid
from geometry.constants import model_space_table
from geometry.model_manifold import ModelManifold
from geometry.registry import list_models, resolve_model
from geometry.weight import WeightSpec
from minimize.bubble_sweep import BubbleSweep
from minimize.minimizer import Minimizer
from spectral.eigensolver import Eigensolver
from utils.errors import ConfigError, YamabeLabError
from utils.misc import dict_to_markdown_yaml, format_float, write_csv, write_json

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "YAMABE_LAB_OUTPUT_DIR"
COMPONENTS = [Minimizer, Eigensolver, ContinuationDriver, BubbleSweep, AuditSuite]
MODEL_SPACE_DIMENSIONS = [3, 4, 5, 6]


def _validation_message(error: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in item['loc']) or '<root>'}: {item['msg']}" for item in error.errors()
    )


def component_defaults(component) -> Dict[str, Any]:
    parser = argparse.ArgumentParser(add_help=False)
    component.add_arguments(parser)
    return vars(parser.parse_args([]))


class _GroupParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def coerce_group(component, group_name: str, values: Dict[str, Any]) -> Dict[str, Any]:
    """Parse a module_args group through the component's own argument declarations.

    Null is accepted only where the declared default is null.
    """
    parser = _GroupParser(prog=group_name, add_help=False)
    component.add_arguments(parser)
    defaults = vars(parser.parse_args([]))
    tokens: List[str] = []
    for key, value in values.items():
        if value is None:
            if defaults[key] is not None:
                raise ConfigError(f"'{key}' in module_args group '{group_name}' must not be null")
        elif isinstance(value, list):
            tokens.append(f"--{key}")
            tokens.extend(json.dumps(item) if isinstance(item, dict) else str(item) for item in value)
        else:
            tokens.append(f"--{key}={json.dumps(value) if isinstance(value, dict) else value}")
    try:
        parsed = vars(parser.parse_args(tokens))
    except ConfigError as e:
        raise ConfigError(f"invalid module_args group '{group_name}': {e}")
    return {key: None if values[key] is None else parsed[key] for key in values}


def load_config(config_path: Optional[str]) -> Tuple[LabArgs, argparse.Namespace]:
    """Read a {"lab_args": ..., "module_args": {"<Component>": ...}} document.

    Module groups are flattened into one namespace on top of the components'
    declared defaults. Unknown groups and keys are rejected.
    """
    config: Dict[str, Any] = {}
    if config_path is not None:
        logger.info(f"Loading lab config from: {config_path}")
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                config = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {config_path}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {config_path} is not valid JSON: {e}")
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(config) - {"lab_args", "module_args"})
    if unknown:
        raise ConfigError(f"unknown config key(s): {unknown}")
    try:
        lab_args = LabArgs(**config.get("lab_args", {}))
    except ValidationError as e:
        raise ConfigError(f"invalid lab_args: {_validation_message(e)}")

    components = {component.__name__: component for component in COMPONENTS}
    defaults = {name: component_defaults(component) for name, component in components.items()}
    module_args: Dict[str, Any] = {}
    for group in defaults.values():
        module_args.update(group)
    for group_name, values in config.get("module_args", {}).items():
        if group_name not in defaults:
            raise ConfigError(f"unknown module_args group '{group_name}'; known: {sorted(defaults)}")
        if not isinstance(values, dict):
            raise ConfigError(f"module_args group '{group_name}' must be an object")
        for key in values:
            if key not in defaults[group_name]:
                raise ConfigError(f"unknown key '{key}' in module_args group '{group_name}'")
        module_args.update(coerce_group(components[group_name], group_name, values))
    return lab_args, argparse.Namespace(**module_args)


class YamabeLab:
    """Front-end wiring the lab components from one config document."""

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser = None):
        if parser is None:
            parser = argparse.ArgumentParser()
        parser.add_argument("--config", type=str, default=None, help="Path to the JSON configuration file")
        parser.add_argument("--out", type=str, default=None, help="Output directory (overrides the config)")
        parser.add_argument("--seed", type=int, default=None, help="Random seed (overrides the config)")
        parser.add_argument("--quiet", action="store_true", help="Only warnings on stderr, no progress bars")
        return parser

    def __init__(self, args):
        self.lab_args, module_args = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError(f"seed must be >= 0, got {args.seed}")
            self.lab_args = self.lab_args.model_copy(update={"seed": args.seed})
        module_args.seed = self.lab_args.seed
        module_args.quiet = args.quiet
        self.quiet = args.quiet
        self.output_dir = args.out or os.environ.get(OUTPUT_DIR_ENV) or self.lab_args.output_dir

        try:
            self.minimizer = Minimizer(module_args).initialize()
            self.eigensolver = Eigensolver(module_args).initialize()
            self.driver = ContinuationDriver(module_args).initialize()
            self.bubble_sweep = BubbleSweep(module_args).initialize()
            self.audit_suite = AuditSuite(module_args).initialize()
        except ValidationError as e:
            raise ConfigError(f"invalid module_args: {_validation_message(e)}")
        self.module_args = module_args

    # run setup

    def model(self) -> ModelManifold:
        return resolve_model(self.lab_args.model)

    def grid(self, m: ModelManifold):
        lab = self.lab_args
        return build_grid(m, lab.r_inner, lab.r_max, lab.num_nodes)

    def exponent(self, m: ModelManifold) -> float:
        return m.p_crit if self.lab_args.p is None else self.lab_args.p

    def run_header(self, command: str, m: ModelManifold = None, g=None) -> Dict[str, Any]:
        header = {"command": command, "seed": self.lab_args.seed}
        if m is not None:
            header["model"] = m.label
            header["n"] = m.n
        if g is not None:
            header["grid"] = g.summary()
        return header

    def write_outputs(
        self,
        command: str,
        summary: Dict[str, Any],
        trace: pd.DataFrame = None,
        field: pd.DataFrame = None,
    ) -> None:
        os.makedirs(self.output_dir, exist_ok=True)
        write_json(summary, os.path.join(self.output_dir, "summary.json"))
        if trace is not None:
            write_csv(trace, os.path.join(self.output_dir, "trace.csv"))
        if field is not None:
            write_csv(field, os.path.join(self.output_dir, "field.csv"))
        write_json(
            {
                "command": command,
                "created": datetime.now(timezone.utc).isoformat(),
                "argv": sys.argv,
                "lab_args": self.lab_args.model_dump(),
                "versions": {
                    "python": sys.version.split()[0],
                    "numpy": np.__version__,
                    "scipy": scipy.__version__,
                    "pandas": pd.__version__,
                    "pydantic": pydantic.VERSION,
                },
            },
            os.path.join(self.output_dir, "metadata.json"),
        )
        logger.info(f"Outputs written to {self.output_dir}")
        print(dict_to_markdown_yaml(summary))

    # commands

    def cmd_q(self) -> int:
        m = self.model()
        g = self.grid(m)
        a = assemble(m, g, WeightSpec())
        e = self.minimizer.minimize(a, self.lab_args.alpha, self.exponent(m))
        summary = self.run_header("q", m, g)
        summary["extremal"] = e.to_dict()
        self.write_outputs("q", summary, field=e.field_frame())
        return 0

    def cmd_mu(self) -> int:
        m = self.model()
        g = self.grid(m)
        w = WeightSpec()
        a = assemble(m, g, w)
        result = self.eigensolver.bottom(a)
        summary = self.run_header("mu", m, g)
        summary["mu"] = result.to_dict()
        trace = None
        if self.eigensolver.r_max_sweep and self.lab_args.r_inner == 0:
            sweep = self.eigensolver.sweep(m, w, g.r_max, g.h)
            summary["sweep"] = sweep.to_dict()
            trace = pd.DataFrame(
                [
                    {key: format_float(value) for key, value in entry.model_dump().items()}
                    for entry in sweep.entries
                ],
                columns=["r_max", "N", "value", "residual", "iterations"],
            )
        elif self.eigensolver.r_max_sweep:
            logger.warning("mu sweep needs r_inner = 0; skipped")
        field = pd.DataFrame(
            {
                "r": [format_float(x) for x in a.r],
                "v": [format_float(x) for x in result.eigenfield],
            }
        )
        self.write_outputs("mu", summary, trace=trace, field=field)
        return 0

    def cmd_continue(self) -> int:
        m = self.model()
        g = self.grid(m)
        verdict = decide_existence(
            m,
            g,
            WeightSpec(),
            self.driver.schedule(m.n),
            self.minimizer.config,
            self.driver.margins,
            blowup_factor=self.driver.blowup_factor,
            alpha0_retries=self.driver.alpha0_retries,
            num_workers=self.driver.num_exterior_workers,
            show_progress=not self.quiet,
        )
        summary = self.run_header("continue", m, g)
        summary["verdict"] = verdict.to_dict()
        summary["certify_mu1"] = verdict.final is not None and certify_mu1(verdict.final)
        trace = verdict.trace.to_frame() if verdict.trace is not None else pd.DataFrame(columns=TRACE_COLUMNS)
        field = verdict.final.field_frame() if verdict.final is not None else None
        self.write_outputs("continue", summary, trace=trace, field=field)
        for note in verdict.notes:
            print(note, file=sys.stderr)
        if not all(verdict.hypotheses_met.values()):
            return 1
        if verdict.trace is not None and verdict.trace.failed:
            return 3
        return 0 if verdict.final is not None else 1

    def cmd_qinf(self) -> int:
        m = self.model()
        g = self.grid(m)
        radii = self.driver.margins.q_inf_radii or [g.r_max / 16.0, g.r_max / 8.0, g.r_max / 4.0]
        report = q_at_infinity(
            m,
            WeightSpec(),
            radii,
            g.r_max,
            self.minimizer.config,
            num_nodes=g.num_nodes,
            num_workers=self.driver.num_exterior_workers,
        )
        summary = self.run_header("qinf", m, g)
        summary["q_at_infinity"] = report.to_dict()
        trace = pd.DataFrame(
            [
                {key: format_float(value) if key != "error" else (value or "") for key, value in entry.model_dump().items()}
                for entry in report.entries
            ],
            columns=["R", "value", "mu", "error"],
        )
        self.write_outputs("qinf", summary, trace=trace)
        errors = [entry for entry in report.entries if entry.error is not None]
        for entry in errors:
            print(f"R={entry.R}: {entry.error}", file=sys.stderr)
        if any(entry.error.startswith("nonconvergent") for entry in errors):
            return 3
        return 1 if errors else 0

    def cmd_audit(self) -> int:
        report = self.audit_suite.run(self.minimizer.config)
        summary = self.run_header("audit")
        summary["audit"] = report.to_dict()
        self.write_outputs("audit", summary)
        for name in report.failures:
            print(f"audit failed: {name}", file=sys.stderr)
        return 0 if report.passed else 1

    def cmd_bubble(self) -> int:
        m = self.model()
        g = self.grid(m)
        a = assemble(m, g, WeightSpec())
        report = self.bubble_sweep.sweep(a)
        summary = self.run_header("bubble", m, g)
        summary["bubble"] = report.to_dict()
        trace = pd.DataFrame(
            [{"lambda": format_float(entry.lam), "Q": format_float(entry.Q)} for entry in report.entries],
            columns=["lambda", "Q"],
        )
        self.write_outputs("bubble", summary, trace=trace)
        if not report.passed:
            print(f"bubble gap {report.rel_gap!r} exceeds {self.bubble_sweep.tol}", file=sys.stderr)
        return 0 if report.passed else 1


def cmd_models() -> int:
    report = {
        "models": list_models(),
        "model_spaces": {
            f"n={n}": [
                {"k": k, "sigma_c0": s0, "sigma_c1": s1, "positive_for_all_c": positive}
                for k, s0, s1, positive in model_space_table(n)
            ]
            for n in MODEL_SPACE_DIMENSIONS
        },
    }
    print(dict_to_markdown_yaml(report))
    return 0


COMMANDS = {
    "q": YamabeLab.cmd_q,
    "mu": YamabeLab.cmd_mu,
    "continue": YamabeLab.cmd_continue,
    "qinf": YamabeLab.cmd_qinf,
    "audit": YamabeLab.cmd_audit,
    "bubble": YamabeLab.cmd_bubble,
}


def build_parser() -> argparse.ArgumentParser:
    common = YamabeLab.add_arguments(argparse.ArgumentParser(add_help=False))
    parser = argparse.ArgumentParser(prog="yamabe_lab", description="Yamabe Lab CLI")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in [*COMMANDS, "models"]:
        subparsers.add_parser(name, parents=[common])
    return parser


def cli_main(argv: List[str] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    if args.command == "models":
        return cmd_models()
    try:
        lab = YamabeLab(args)
        logger.info(f"Working with {args.command} on {lab.lab_args.model}...")
        code = COMMANDS[args.command](lab)
        logger.info(f"Finished {args.command} with exit code {code}")
        return code
    except YamabeLabError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(cli_main())
