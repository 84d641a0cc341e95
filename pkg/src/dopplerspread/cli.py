"""Command-line experiment runner.

Usage::

    dopplerspread <scenario> --config <path> [--key value ...] --out <path>

Config files hold one ``key = value`` per line with ``#`` comments.  A CSV
written by this tool is itself a valid config: its first line carries the
resolved configuration.  Angles are given in degrees.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .array import AodRegion, ArrayGeometry, make_bank
from .channel import numerical_psd
from .errors import DimensionError, DomainError, NumericError
from .linksim import OfdmConfig, run_ser_sweep, weights_for_mode
from .spectrum import (VARIANTS, WindowFunction, closed_form_window, discrete_window, normalized_grid,
                       psd_analytic, window_eval)
from .weighting import assemble_c_matrices, doppler_spread_from_matrices, optimal_weights

SCENARIOS = ("psd", "window", "spread", "weights", "ser", "sweep")
EXIT_USAGE, EXIT_NUMERIC = 2, 3
HEADER = "# config: "


class UsageError(Exception):
    pass


def _int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _str_list(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


@dataclass(frozen=True)
class Key:
    parse: Callable
    default: object = None  # None marks a required key


# theta_l/theta_r are degrees on disk; ExperimentConfig converts to radians
KEYS = {
    "theta_l": Key(float),
    "theta_r": Key(float),
    "m": Key(int, 16),
    "spacing": Key(float, 0.45),
    "layout": Key(str, "equicos"),
    "q": Key(int, 0),  # 0 means q = m
    "bank_seed": Key(int, 0),
    "f_d": Key(float, 1000.0),
    "weights": Key(str, "equal"),
    "n_grid": Key(int, 2000),
    "variant": Key(str, "equicos"),
    "numerical": Key(int, 0),
    "realizations": Key(int, 1000),
    "n_points": Key(int, 2048),
    "scatterers": Key(int, 256),
    "seed": Key(int, 0),
    "spacings": Key(_float_list, (0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.47, 0.49, 0.495, 0.5)),
    "ms": Key(_int_list, (16, 64, 256)),
    "layouts": Key(_str_list, ("equicos", "equiangle")),
    "snr_db": Key(_float_list, (0.0, 10.0, 20.0, 30.0, 40.0)),
    "frames": Key(int, 100),
    "rx_m": Key(int, 4),
    "rx_spacing": Key(float, 0.5),
    "n_subcarriers": Key(int, 128),
    "cp_len": Key(int, 16),
    "blocks": Key(int, 5),
    "t_block": Key(float, 1e-4),
    "constellation": Key(str, "qam16"),
    "taps": Key(_int_list, (0,)),
    "workers": Key(int, 1),
}

SCENARIO_KEYS = {
    "window": ("theta_l", "theta_r", "variant", "layout", "q", "bank_seed", "n_grid"),
    "psd": ("theta_l", "theta_r", "m", "spacing", "layout", "q", "bank_seed", "f_d", "weights",
            "n_grid", "numerical", "realizations", "n_points", "scatterers", "seed"),
    "spread": ("theta_l", "theta_r", "spacings", "ms", "layouts", "f_d", "weights"),
    "weights": ("theta_l", "theta_r", "m", "spacing", "layout"),
    "sweep": ("theta_l", "theta_r", "ms", "spacing", "layout", "f_d"),
    "ser": ("theta_l", "theta_r", "m", "spacing", "layout", "q", "bank_seed", "f_d", "weights",
            "snr_db", "frames", "seed", "rx_m", "rx_spacing", "n_subcarriers", "cp_len", "blocks",
            "t_block", "constellation", "taps", "scatterers", "workers"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved scenario parameters; angles in radians.

    ``degrees`` keeps the angles exactly as given so the echoed header
    round-trips without a radian conversion.
    """

    scenario: str
    params: dict
    degrees: dict

    def __getitem__(self, key):
        return self.params[key]

    @property
    def region(self) -> AodRegion:
        return AodRegion(self.params["theta_l"], self.params["theta_r"])

    def canonical(self) -> str:
        """``scenario=...; key=value; ...`` with keys sorted and angles in degrees."""
        items = [f"scenario={self.scenario}"]
        for key in sorted(self.params):
            value = self.params[key]
            if key in self.degrees:
                value = self.degrees[key]
            items.append(f"{key}={_fmt(value)}")
        return "; ".join(items)


def _read_pairs(path: Path) -> dict:
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    if lines and lines[0].startswith(HEADER):
        return dict(_split_pair(item) for item in lines[0][len(HEADER):].split(";") if item.strip())
    pairs = {}
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if line:
            key, value = _split_pair(line)
            pairs[key] = value
    return pairs


def _split_pair(text: str) -> tuple:
    if "=" not in text:
        raise UsageError(f"malformed config line {text.strip()!r}; expected key=value")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def parse_config(scenario: str, path=None, overrides: dict = None) -> ExperimentConfig:
    """Merge file values and flag overrides (flags win) into a validated config."""
    if scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {scenario!r}; expected one of {', '.join(SCENARIOS)}")
    raw = _read_pairs(Path(path)) if path else {}
    file_scenario = raw.pop("scenario", scenario)
    if file_scenario != scenario:
        raise UsageError(f"config is for scenario {file_scenario!r}, not {scenario!r}")
    raw.update(overrides or {})
    allowed = SCENARIO_KEYS[scenario]
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise UsageError(f"unknown key {unknown[0]!r} for scenario {scenario!r}")
    params = {}
    for key in allowed:
        spec = KEYS[key]
        if key not in raw:
            if spec.default is None:
                raise UsageError(f"missing required key {key!r}")
            params[key] = spec.default
            continue
        try:
            params[key] = spec.parse(raw[key])
        except ValueError:
            raise UsageError(f"malformed value {raw[key]!r} for key {key!r}") from None
    degrees = {key: params[key] for key in ("theta_l", "theta_r")}
    for key in degrees:
        params[key] = math.radians(params[key])
    return ExperimentConfig(scenario, params, degrees)


# -- scenarios ----------------------------------------------------------------

def _geometry(cfg, m=None, spacing=None):
    return ArrayGeometry.ula(m or cfg["m"], cfg["spacing"] if spacing is None else spacing)


def _bank(cfg, region):
    q = cfg["q"] or cfg.params.get("m", 1)
    return make_bank(region, q, cfg["layout"], cfg["bank_seed"])


def _weights(cfg, geom, region):
    return weights_for_mode(cfg["weights"], geom, region, cfg["layout"])


def run_window(cfg):
    region = cfg.region
    variant = cfg["variant"]
    if variant not in VARIANTS:
        raise UsageError(f"malformed value {variant!r} for key 'variant'")
    win = discrete_window(_bank(cfg, region)) if variant == "discrete" else WindowFunction(variant, region)
    x = normalized_grid(region.mu, cfg["n_grid"])
    return ["omega_tilde", "window"], zip(x, window_eval(win, x))


def run_psd(cfg):
    region = cfg.region
    geom = _geometry(cfg)
    bank = _bank(cfg, region)
    win = closed_form_window(region, cfg["layout"])
    u = _weights(cfg, geom, region)
    omega_d = 2 * math.pi * cfg["f_d"]
    if cfg["numerical"]:
        est = numerical_psd(region, geom, bank, cfg["f_d"], cfg["n_points"], cfg["realizations"],
                            cfg["seed"], u, cfg["scatterers"])
        keep = np.abs(est.omega_tilde) <= region.mu
        omega = est.omega[keep]
        numerical = est.values[keep]
    else:
        omega = normalized_grid(region.mu, cfg["n_grid"]) * omega_d
        numerical = None
    ana = psd_analytic(geom, region, win, omega_d, omega, u)
    lookup = dict(zip(ana.omega_tilde.tolist(), ana.values.tolist()))
    x = omega / omega_d
    analytic = [lookup.get(v, math.inf) for v in x.tolist()]
    if numerical is None:
        return ["omega_rad_s", "omega_tilde", "psd_analytic"], zip(omega, x, analytic)
    return ["omega_rad_s", "omega_tilde", "psd_analytic", "psd_numerical"], zip(omega, x, analytic, numerical)


def run_spread(cfg):
    region = cfg.region
    omega_d = 2 * math.pi * cfg["f_d"]
    rows = []
    for layout in cfg["layouts"]:
        win = closed_form_window(region, layout)
        for m in cfg["ms"]:
            for spacing in cfg["spacings"]:
                geom = ArrayGeometry.ula(m, spacing)
                cm = assemble_c_matrices(geom, region, win)
                u = optimal_weights(cm).weights if cfg["weights"] == "optimal" else None
                rows.append((spacing, m, layout, doppler_spread_from_matrices(cm, omega_d, u)))
    return ["d_over_lambda", "M", "layout", "sigma_ds_rad_s"], rows


def run_weights(cfg):
    region = cfg.region
    geom = _geometry(cfg)
    u = optimal_weights(assemble_c_matrices(geom, region, closed_form_window(region, cfg["layout"]))).weights
    return ["index", "weight_real", "weight_imag", "weight_abs"], (
        (i, w.real, w.imag, abs(w)) for i, w in enumerate(u))


def run_sweep(cfg):
    """Doppler spread with equal and with optimal weights versus array size."""
    region = cfg.region
    win = closed_form_window(region, cfg["layout"])
    omega_d = 2 * math.pi * cfg["f_d"]
    rows = []
    for m in cfg["ms"]:
        cm = assemble_c_matrices(ArrayGeometry.ula(m, cfg["spacing"]), region, win)
        rows.append((m, doppler_spread_from_matrices(cm, omega_d),
                     doppler_spread_from_matrices(cm, omega_d, optimal_weights(cm).weights)))
    return ["M", "sigma_equal_rad_s", "sigma_optimal_rad_s"], rows


def run_ser(cfg):
    region = cfg.region
    geom = _geometry(cfg)
    ofdm = OfdmConfig(cfg["n_subcarriers"], cfg["cp_len"], cfg["blocks"], cfg["t_block"],
                      cfg["constellation"], cfg["taps"], cfg["scatterers"])
    rx = ArrayGeometry.ula(cfg["rx_m"], cfg["rx_spacing"])
    results = run_ser_sweep(ofdm, geom, rx, _bank(cfg, region), region, cfg["f_d"],
                            _weights(cfg, geom, region), cfg["snr_db"], cfg["frames"], cfg["seed"],
                            cfg["workers"])
    return ["snr_db", "ser", "symbols", "seed"], (
        (r.snr_db, r.ser, r.symbols_tested, r.seed) for r in results)


RUNNERS = {"window": run_window, "psd": run_psd, "spread": run_spread, "weights": run_weights,
           "sweep": run_sweep, "ser": run_ser}


def run_scenario(cfg: ExperimentConfig, out) -> None:
    """Compute the scenario and write its CSV to ``out`` (path or text stream)."""
    columns, rows = RUNNERS[cfg.scenario](cfg)
    lines = [HEADER + cfg.canonical(), ",".join(columns)]
    lines += [",".join(_fmt(float(v) if isinstance(v, (float, np.floating)) else v) for v in row)
              for row in rows]
    text = "\n".join(lines) + "\n"
    if hasattr(out, "write"):
        out.write(text)
    else:
        Path(out).write_text(text)


# -- entry point --------------------------------------------------------------

def _overrides(extra: list) -> dict:
    if len(extra) % 2:
        raise UsageError(f"flag {extra[-1]!r} has no value")
    pairs = {}
    for flag, value in zip(extra[::2], extra[1::2]):
        if not flag.startswith("--"):
            raise UsageError(f"expected --key, got {flag!r}")
        pairs[flag[2:].replace("-", "_")] = value
    return pairs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dopplerspread", description=__doc__.splitlines()[0])
    parser.add_argument("scenario", choices=SCENARIOS)
    parser.add_argument("--config", help="key=value file or a previous output CSV")
    parser.add_argument("--out", required=True, help="output CSV path ('-' for stdout)")
    args, extra = parser.parse_known_args(argv)
    try:
        cfg = parse_config(args.scenario, args.config, _overrides(extra))
        run_scenario(cfg, sys.stdout if args.out == "-" else args.out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"dopplerspread: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, DimensionError, NumericError) as exc:
        where = exc.__traceback__
        while where.tb_next is not None:
            where = where.tb_next
        module = where.tb_frame.f_globals.get("__name__", "?")
        print(f"dopplerspread: {module}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
